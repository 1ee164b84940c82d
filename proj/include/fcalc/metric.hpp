#pragma once

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "fcalc/chart.hpp"
#include "fcalc/parallel.hpp"

namespace fcalc {

struct ReachOptions {
  int multistarts = 16;
  int max_iterations = 200;
  double fiber_tol = 1e-6;  // |exponential(x,z) - y| below this counts as on-fiber
  std::uint64_t seed = 0x9d2c5680;
};

struct ReachResult {
  bool reachable = false;
  Vec z;              // best point found
  double residual = kInfinity;
};

namespace detail {

inline Vec clamp_to_ball_box(const GradedSpace& space, const Vec& z, double lambda) {
  Vec h = space.ball_halfwidth(lambda);
  Vec out = z;
  for (int j = 0; j < space.dim(); ++j) out[j] = std::clamp(out[j], -h[j], h[j]);
  return out;
}

}  // namespace detail

// Reachability oracle: projected gradient descent on |exponential(x,z) - y|^2
// over the box-shaped ball |z|_V <= lambda. Multistart with a deterministic
// stream; exits as soon as any start drops below fiber_tol.
inline ReachResult reach_in_ball(const FilteredChart& chart, const Vec& x, const Vec& y, double lambda,
                                 const ReachOptions& opt = {}, const std::vector<Vec>* warm_starts = nullptr) {
  const GradedSpace& space = chart.space();
  ReachResult best;
  best.z = Vec::Zero(space.dim());
  Rng root(opt.seed);

  std::vector<Vec> starts;
  starts.push_back(Vec::Zero(space.dim()));
  if (warm_starts) {
    for (const Vec& w : *warm_starts) starts.push_back(detail::clamp_to_ball_box(space, w, lambda));
  }
  int random_needed = std::max(0, opt.multistarts - static_cast<int>(starts.size()));
  for (int s = 0; s < random_needed; ++s)
    starts.push_back(space.sample_ball_point(lambda, root.fork(static_cast<std::uint64_t>(s))));

  const double tol2 = opt.fiber_tol * opt.fiber_tol;
  for (const Vec& z0 : starts) {
    Vec z = z0;
    Vec r = chart.exponential(x, z) - y;
    double f = 0.5 * r.squaredNorm();
    if (f < best.residual * best.residual * 0.5) {
      best.residual = std::sqrt(2.0 * f);
      best.z = z;
    }
    double alpha = 1.0;
    for (int it = 0; it < opt.max_iterations; ++it) {
      if (f <= 0.5 * tol2) break;
      Mat J = chart.jacobian(x, z);
      Vec g = J.transpose() * r;
      double gn = g.norm();
      if (gn < 1e-15) break;
      // Backtracking with sufficient decrease on the projected step.
      bool accepted = false;
      alpha = std::min(alpha * 2.0, 4.0 / std::max(1e-12, J.squaredNorm()));
      for (int bt = 0; bt < 30; ++bt) {
        Vec zc = detail::clamp_to_ball_box(space, z - alpha * g, lambda);
        Vec step = zc - z;
        if (step.norm() < 1e-16) break;
        Vec rc = chart.exponential(x, zc) - y;
        double fc = 0.5 * rc.squaredNorm();
        if (fc <= f - 1e-4 * (step.squaredNorm() / alpha)) {
          z = zc;
          r = rc;
          f = fc;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
      if (f < 0.5 * best.residual * best.residual) {
        best.residual = std::sqrt(2.0 * f);
        best.z = z;
      }
    }
    if (best.residual < opt.fiber_tol) break;
  }
  best.reachable = best.residual < opt.fiber_tol;
  return best;
}

// NSW-style quasi-metric: inf of ball radii lambda with y in the exponential
// image of B_V(0,lambda), by bisection over lambda with the reachability
// oracle. Unreachable at lambda = epsilon yields the infinity sentinel, never
// an exception, so metric tables stay total.
inline double quasi_metric(const FilteredChart& chart, const Vec& x, const Vec& y, double tol,
                           const ReachOptions& opt = {}) {
  if (!(tol > 0)) throw std::invalid_argument("quasi_metric: tol must be positive");
  if ((x - y).norm() < 1e-15) return 0.0;
  const GradedSpace& space = chart.space();
  double hi = chart.epsilon();
  ReachResult top = reach_in_ball(chart, x, y, hi, opt);
  if (!top.reachable) return kInfinity;
  std::vector<Vec> warm{top.z};
  hi = std::min(hi, space.homogeneous_norm(top.z));  // the witness itself bounds rho
  double lo = 0.0;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (mid <= 0) break;
    ReachResult r = reach_in_ball(chart, x, y, mid, opt, &warm);
    if (r.reachable) {
      warm.assign(1, r.z);
      hi = std::min(mid, space.homogeneous_norm(r.z));
    } else {
      lo = mid;
    }
  }
  return hi;
}

// Table of pairwise quasi-metric values over a point cloud; rho is assumed
// symmetric here (checked separately on sampled pairs) so only the upper
// triangle is solved.
struct MetricTable {
  std::vector<Vec> points;
  Eigen::MatrixXd rho;
  double tol = 0.0;

  double operator()(int i, int j) const { return rho(i, j); }
};

inline MetricTable build_metric_table(const FilteredChart& chart, std::vector<Vec> points, double tol,
                                      const ReachOptions& opt = {}) {
  MetricTable t;
  t.points = std::move(points);
  t.tol = tol;
  const int n = static_cast<int>(t.points.size());
  t.rho.setZero(n, n);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> vals(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    ReachOptions o = opt;
    o.seed = mix64(opt.seed ^ (static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ull));
    vals[k] = quasi_metric(chart, t.points[static_cast<std::size_t>(pairs[k].first)],
                           t.points[static_cast<std::size_t>(pairs[k].second)], tol, o);
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    t.rho(pairs[k].first, pairs[k].second) = vals[k];
    t.rho(pairs[k].second, pairs[k].first) = vals[k];
  }
  return t;
}

// Binary cache: header (magic, version, scenario hash, grid spec, tol) then
// row-major float64 rho values. Reused across CLI runs when the hash matches.
inline bool save_metric_table(const MetricTable& t, const std::string& path, std::uint64_t scenario_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  const std::uint32_t magic = 0x46435254u;  // "FCRT"
  const std::uint32_t version = 1;
  const std::uint32_t n = static_cast<std::uint32_t>(t.points.size());
  const std::uint32_t d = n > 0 ? static_cast<std::uint32_t>(t.points[0].size()) : 0;
  out.write(reinterpret_cast<const char*>(&magic), 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&scenario_hash), 8);
  out.write(reinterpret_cast<const char*>(&t.tol), 8);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  for (const Vec& p : t.points)
    for (int i = 0; i < static_cast<int>(d); ++i) out.write(reinterpret_cast<const char*>(&p[i]), 8);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j) {
      double v = t.rho(static_cast<int>(i), static_cast<int>(j));
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  return static_cast<bool>(out);
}

inline bool load_metric_table(MetricTable& t, const std::string& path, std::uint64_t scenario_hash,
                              double expected_tol) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::uint32_t magic = 0, version = 0, n = 0, d = 0;
  std::uint64_t hash = 0;
  double tol = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&hash), 8);
  in.read(reinterpret_cast<char*>(&tol), 8);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in || magic != 0x46435254u || version != 1 || hash != scenario_hash || tol != expected_tol) return false;
  t.tol = tol;
  t.points.assign(n, Vec::Zero(static_cast<int>(d)));
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t k = 0; k < d; ++k) in.read(reinterpret_cast<char*>(&t.points[i][static_cast<int>(k)]), 8);
  t.rho.resize(static_cast<int>(n), static_cast<int>(n));
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j) in.read(reinterpret_cast<char*>(&t.rho(static_cast<int>(i), static_cast<int>(j))), 8);
  return static_cast<bool>(in);
}

struct MetricConstants {
  double C_rho = 0.0;    // quasi-triangle constant
  double C_mu = 0.0;     // doubling constant of ball volumes
  double c_lower = 0.0;  // c |x-y| <= rho
  double C_upper = 0.0;  // rho <= C |x-y|^{1/w_N}
};

// Occupancy-grid estimate of vol(Lambda_x(B_V(0,r))); the image of the
// lambda-ball is exactly the rho-ball.
inline double image_ball_volume(const FilteredChart& chart, const Vec& x, double r, int samples, Rng stream) {
  const int d = chart.dim();
  std::vector<Vec> images;
  images.reserve(static_cast<std::size_t>(samples));
  Vec lo = x, hi = x;
  for (int i = 0; i < samples; ++i) {
    Vec z = chart.space().sample_ball_point(r, stream.fork(static_cast<std::uint64_t>(i)));
    Vec y = chart.exponential(x, z);
    images.push_back(y);
    for (int c = 0; c < d; ++c) {
      lo[c] = std::min(lo[c], y[c]);
      hi[c] = std::max(hi[c], y[c]);
    }
  }
  const int cells_per_axis = 48;
  Vec h = (hi - lo) / cells_per_axis;
  for (int c = 0; c < d; ++c) h[c] = std::max(h[c], 1e-14);
  std::vector<char> occupied(static_cast<std::size_t>(std::pow(cells_per_axis + 1, d)), 0);
  double cellvol = 1.0;
  for (int c = 0; c < d; ++c) cellvol *= h[c];
  std::size_t count = 0;
  for (const Vec& y : images) {
    std::size_t idx = 0;
    for (int c = 0; c < d; ++c) {
      int k = std::min(cells_per_axis, static_cast<int>((y[c] - lo[c]) / h[c]));
      idx = idx * static_cast<std::size_t>(cells_per_axis + 1) + static_cast<std::size_t>(k);
    }
    if (!occupied[idx]) {
      occupied[idx] = 1;
      ++count;
    }
  }
  return static_cast<double>(count) * cellvol;
}

// Empirical metric-space constants: quasi-triangle ratio over random triples,
// doubling ratio of exponential-image ball volumes, and the two-sided
// comparability fit against the Euclidean metric.
inline MetricConstants measured_metric_constants(const FilteredChart& chart, int sample_count,
                                                 std::uint64_t seed, double tol = 1e-3,
                                                 const ReachOptions& reach = {}) {
  MetricConstants out;
  Rng root(seed);
  const int n_points = std::clamp(static_cast<int>(std::lround(std::sqrt(2.0 * sample_count))), 6, 24);
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    Rng s = root.fork(static_cast<std::uint64_t>(i));
    pts.push_back(chart.random_domain_point(s));
  }
  ReachOptions r = reach;
  r.seed = mix64(seed ^ 0xabcdef);
  MetricTable table = build_metric_table(chart, pts, tol, r);

  for (int i = 0; i < n_points; ++i)
    for (int j = 0; j < n_points; ++j)
      if (i != j && !std::isfinite(table(i, j)))
        throw ChartTooLarge("measured_metric_constants: unreachable pair, domain too large for epsilon");

  out.c_lower = kInfinity;
  const int wN = chart.space().max_weight();
  for (int i = 0; i < n_points; ++i) {
    for (int j = 0; j < n_points; ++j) {
      if (i == j) continue;
      double rho = table(i, j);
      double eu = (pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(j)]).norm();
      if (eu < 1e-12) continue;
      out.c_lower = std::min(out.c_lower, rho / eu);
      out.C_upper = std::max(out.C_upper, rho / std::pow(eu, 1.0 / wN));
      for (int k = 0; k < n_points; ++k) {
        if (k == i || k == j) continue;
        double denom = table(i, k) + table(j, k);
        if (denom > tol) out.C_rho = std::max(out.C_rho, rho / denom);
      }
    }
  }

  // Doubling constant from exponential-image volumes: the image of the
  // lambda-ball is exactly the rho-ball, so occupancy counts on a fixed grid
  // estimate vol(B_rho(x,r)) without further metric solves.
  double worst = 0.0;
  const int centers = 3;
  const double r_small = 0.20 * chart.epsilon();
  for (int c = 0; c < centers; ++c) {
    Rng s = root.fork(0x1000 + static_cast<std::uint64_t>(c));
    Vec x = chart.random_domain_point(s);
    double v1 = image_ball_volume(chart, x, r_small, 20000, s.fork(1));
    double v2 = image_ball_volume(chart, x, 2.0 * r_small, 20000, s.fork(2));
    if (v1 > 0) worst = std::max(worst, v2 / v1);
  }
  out.C_mu = worst;
  return out;
}

}  // namespace fcalc
