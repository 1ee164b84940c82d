#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "fcalc/chart.hpp"
#include "fcalc/metric.hpp"

namespace fcalc {

enum class FiberMethod { automatic, exact_point, tracked, tube_mc };

inline const char* to_string(FiberMethod m) {
  switch (m) {
    case FiberMethod::exact_point: return "exact-point";
    case FiberMethod::tracked: return "fiber-tracked";
    case FiberMethod::tube_mc: return "tube-mc";
    default: return "automatic";
  }
}

struct FiberOptions {
  FiberMethod method = FiberMethod::automatic;
  int newton_starts = 12;
  int newton_iters = 60;
  double root_tol = 1e-10;       // accepted on-fiber residual for roots/corrections
  int tracking_steps = 64;       // per-direction step budget
  double step_fraction = 1.0 / 24.0;  // arclength step = fraction * ball extent
  int tube_samples = 20000;
  double tube_eta_fraction = 1.0 / 20.0;  // slab half-width eta = r/20
  std::uint64_t seed = 0x51ab;
};

// Quadrature rule approximating integration against the fiber measure
// (Hausdorff measure weighted by 1/|D Lambda|) restricted to B_V(0, radius).
struct FiberQuadrature {
  std::vector<Vec> points;
  std::vector<double> weights;
  FiberMethod method = FiberMethod::automatic;
  double radius = 0.0;
  double fiber_tol = 0.0;  // guaranteed |Lambda_x(z_i) - y| on the nodes

  bool empty() const { return points.empty(); }

  template <typename G>
  auto integrate(G&& g) const {
    using R = decltype(g(points.empty() ? Vec() : points[0]));
    R acc{};
    for (std::size_t i = 0; i < points.size(); ++i) acc += weights[i] * g(points[i]);
    return acc;
  }

  double mass() const {
    double m = 0.0;
    for (double w : weights) m += w;
    return m;
  }

  double min_norm(const GradedSpace& space) const {
    double m = kInfinity;
    for (const Vec& p : points) m = std::min(m, space.homogeneous_norm(p));
    return m;
  }
};

namespace detail {

// Damped Gauss-Newton for Lambda_x(z) = y, minimal-norm steps. Works for all
// N >= d; for N = d it reduces to Newton.
inline bool gauss_newton_solve(const FilteredChart& chart, const Vec& x, const Vec& y, Vec& z, int iters,
                               double tol) {
  Vec r = chart.exponential(x, z) - y;
  double res = r.norm();
  for (int it = 0; it < iters; ++it) {
    if (res < tol) return true;
    Mat J = chart.jacobian(x, z);
    Mat G = J * J.transpose();
    Eigen::FullPivLU<Mat> lu(G);
    if (!lu.isInvertible()) return false;
    Vec step = J.transpose() * lu.solve(r);
    double damp = 1.0;
    for (int bt = 0; bt < 25; ++bt) {
      Vec zc = z - damp * step;
      Vec rc = chart.exponential(x, zc) - y;
      if (rc.norm() < res) {
        z = zc;
        r = rc;
        res = rc.norm();
        break;
      }
      damp *= 0.5;
      if (bt == 24) return res < tol;
    }
  }
  return res < tol;
}

// Unit tangent of the one-dimensional fiber: kernel vector of the d x N
// Jacobian, oriented along `orient` when given.
inline Vec fiber_tangent(const Mat& J, const Vec* orient) {
  Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeFullV);
  Vec t = svd.matrixV().col(J.cols() - 1);
  if (orient && t.dot(*orient) < 0) t = -t;
  return t;
}

struct ChainPoint {
  Vec z;
  double inv_weight;  // 1 / |D Lambda|
};

}  // namespace detail

// Fiber quadrature dispatch. Method selection: zero-dimensional fibers (N=d)
// via Newton root collection, one-dimensional fibers via arclength tracking,
// higher codimension via the tube Monte Carlo estimator justified by the
// co-area formula. Empty output is a value, not an error: it is the correct
// result whenever r < rho(x,y).
inline FiberQuadrature fiber_quadrature(const FilteredChart& chart, const Vec& x, const Vec& y, double r,
                                        FiberOptions opt = {}) {
  const GradedSpace& space = chart.space();
  const int N = space.dim();
  const int d = chart.dim();
  if (r > chart.epsilon() * 1.0000001)
    throw std::invalid_argument("fiber_quadrature: radius exceeds chart epsilon");
  FiberMethod method = opt.method;
  if (method == FiberMethod::automatic)
    method = (N == d) ? FiberMethod::exact_point : (N - d == 1 ? FiberMethod::tracked : FiberMethod::tube_mc);

  FiberQuadrature q;
  q.method = method;
  q.radius = r;
  Rng root(opt.seed);

  if (method == FiberMethod::tube_mc) {
    const double eta = r * opt.tube_eta_fraction;
    q.fiber_tol = eta;
    // Euclidean eta-ball volume in R^d.
    double vol_eta = std::pow(3.141592653589793, 0.5 * d) / std::tgamma(0.5 * d + 1.0) * std::pow(eta, d);
    double w = space.ball_volume(r) / (static_cast<double>(opt.tube_samples) * vol_eta);
    for (int i = 0; i < opt.tube_samples; ++i) {
      Vec z = space.sample_ball_point(r, root.fork(static_cast<std::uint64_t>(i)));
      if ((chart.exponential(x, z) - y).norm() < eta) {
        q.points.push_back(z);
        q.weights.push_back(w);
      }
    }
    return q;
  }

  q.fiber_tol = opt.root_tol * 10.0;

  if (method == FiberMethod::exact_point) {
    // All isolated roots inside the ball; weight 1/|det D Lambda| each.
    std::vector<Vec> starts;
    starts.push_back(Vec::Zero(N));
    for (int s = 1; s < opt.newton_starts; ++s)
      starts.push_back(space.sample_ball_point(r, root.fork(static_cast<std::uint64_t>(s))));
    for (const Vec& z0 : starts) {
      Vec z = z0;
      if (!detail::gauss_newton_solve(chart, x, y, z, opt.newton_iters, opt.root_tol)) continue;
      if (space.homogeneous_norm(z) >= r) continue;
      bool dup = false;
      for (const Vec& p : q.points)
        if ((p - z).norm() < std::max(1e-9, 1e-5 * r)) {
          dup = true;
          break;
        }
      if (dup) continue;
      Mat J = chart.jacobian(x, z);
      double w = chart.coarea_weight_of(J);
      q.points.push_back(z);
      q.weights.push_back(1.0 / w);
    }
    return q;
  }

  // One-dimensional fiber: predictor-corrector arclength tracking from
  // Gauss-Newton seeds, trapezoid weights len * avg(1/|D Lambda|) over
  // consecutive nodes, with bisected clipping at the ball boundary.
  const double extent = space.ball_halfwidth(r).maxCoeff();
  const double h = std::max(1e-12, extent * opt.step_fraction);

  std::vector<Vec> starts;
  starts.push_back(Vec::Zero(N));
  for (int s = 1; s < opt.newton_starts; ++s)
    starts.push_back(space.sample_ball_point(r, root.fork(0x700 + static_cast<std::uint64_t>(s))));

  auto corrected = [&](Vec z) -> std::optional<Vec> {
    if (detail::gauss_newton_solve(chart, x, y, z, 6, opt.root_tol)) return z;
    return std::nullopt;
  };

  auto walk = [&](const Vec& seed, const Vec& dir0, std::vector<detail::ChainPoint>& out, bool& closed) {
    Vec dir = dir0;
    Vec z = seed;
    closed = false;
    for (int step = 0; step < opt.tracking_steps; ++step) {
      Mat J = chart.jacobian(x, z);
      Vec t = detail::fiber_tangent(J, &dir);
      auto zn = corrected(z + h * t);
      if (!zn) break;
      dir = *zn - z;
      if (dir.norm() < 0.25 * h) break;  // stalled
      if (step >= 4 && (*zn - seed).norm() < 0.8 * h) {
        closed = true;
        break;
      }
      if (space.homogeneous_norm(*zn) >= r) {
        // Bisect the crossing of |z|_V = r along the segment.
        double a = 0.0, b = 1.0;
        for (int k = 0; k < 40; ++k) {
          double m = 0.5 * (a + b);
          Vec zm = z + m * (*zn - z);
          if (space.homogeneous_norm(zm) < r)
            a = m;
          else
            b = m;
        }
        Vec zb = z + a * (*zn - z);
        if (auto zc = corrected(zb); zc && space.homogeneous_norm(*zc) < r) {
          Mat Jb = chart.jacobian(x, *zc);
          out.push_back({*zc, 1.0 / chart.coarea_weight_of(Jb)});
        }
        break;
      }
      Mat Jn = chart.jacobian(x, *zn);
      out.push_back({*zn, 1.0 / chart.coarea_weight_of(Jn)});
      z = *zn;
    }
  };

  std::vector<std::vector<detail::ChainPoint>> components;
  for (const Vec& z0 : starts) {
    Vec z = z0;
    if (!detail::gauss_newton_solve(chart, x, y, z, opt.newton_iters, opt.root_tol)) continue;
    if (space.homogeneous_norm(z) >= r) continue;
    bool dup = false;
    for (const auto& comp : components) {
      for (const auto& cp : comp)
        if ((cp.z - z).norm() < 1.5 * h) {
          dup = true;
          break;
        }
      if (dup) break;
    }
    if (dup) continue;

    Mat J = chart.jacobian(x, z);
    Vec t0 = detail::fiber_tangent(J, nullptr);
    std::vector<detail::ChainPoint> fwd, bwd;
    bool closed_f = false, closed_b = false;
    walk(z, t0, fwd, closed_f);
    if (!closed_f) walk(z, (-t0).eval(), bwd, closed_b);

    std::vector<detail::ChainPoint> chain;
    chain.reserve(bwd.size() + 1 + fwd.size());
    for (auto it = bwd.rbegin(); it != bwd.rend(); ++it) chain.push_back(*it);
    chain.push_back({z, 1.0 / chart.coarea_weight_of(J)});
    for (const auto& cp : fwd) chain.push_back(cp);
    if (chain.size() >= 2) {
      // Trapezoid accumulation onto the nodes.
      std::vector<double> w(chain.size(), 0.0);
      for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        double len = (chain[i + 1].z - chain[i].z).norm();
        w[i] += 0.5 * len * chain[i].inv_weight;
        w[i + 1] += 0.5 * len * chain[i + 1].inv_weight;
      }
      if (closed_f) {
        double len = (chain.front().z - chain.back().z).norm();
        w.front() += 0.5 * len * chain.front().inv_weight;
        w.back() += 0.5 * len * chain.back().inv_weight;
      }
      for (std::size_t i = 0; i < chain.size(); ++i) {
        q.points.push_back(chain[i].z);
        q.weights.push_back(w[i]);
      }
      components.push_back(std::move(chain));
    }
  }
  return q;
}

// Compactly supported scalar data for the co-area identity checks.
struct BallFunction {
  std::function<double(const Vec&)> fn;
  double support_radius;  // homogeneous-norm support bound
  double operator()(const Vec& z) const { return fn(z); }
};

struct DomainFunction {
  std::function<double(const Vec&)> fn;
  Box support;
  double operator()(const Vec& y) const { return fn(y); }
};

namespace detail {

// Midpoint tensor-product quadrature; bump-type integrands make this
// superalgebraically accurate.
template <typename F>
double midpoint_integrate(const Box& box, int nodes_per_axis, F&& f) {
  const int dim = box.dim();
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  Vec h = box.extent() / static_cast<double>(nodes_per_axis);
  double cell = 1.0;
  for (int i = 0; i < dim; ++i) cell *= h[i];
  double acc = 0.0;
  const long total = static_cast<long>(std::pow(nodes_per_axis, dim));
  Vec p(dim);
  for (long k = 0; k < total; ++k) {
    long rem = k;
    for (int i = 0; i < dim; ++i) {
      int ni = static_cast<int>(rem % nodes_per_axis);
      rem /= nodes_per_axis;
      p[i] = box.lo[i] + (ni + 0.5) * h[i];
    }
    acc += f(p);
  }
  return acc * cell;
}

// Bounding box of the exponential image of the r-ball, probed by sampling.
inline Box image_box(const FilteredChart& chart, const Vec& x, double r, Rng stream, int probes = 256) {
  Vec lo = x, hi = x;
  for (int i = 0; i < probes; ++i) {
    Vec z = chart.space().sample_sphere_point(r * (0.2 + 0.8 * ((i % 5) / 4.0)), stream.fork(static_cast<std::uint64_t>(i)));
    if (chart.space().homogeneous_norm(z) >= r) z = chart.space().dilate(z, 0.999 * r / chart.space().homogeneous_norm(z));
    Vec y = chart.exponential(x, z);
    for (int c = 0; c < chart.dim(); ++c) {
      lo[c] = std::min(lo[c], y[c]);
      hi[c] = std::max(hi[c], y[c]);
    }
  }
  Vec pad = (hi - lo) * 0.06 + Vec::Constant(chart.dim(), 1e-9);
  return Box{lo - pad, hi + pad};
}

inline Box box_intersection(const Box& a, const Box& b) {
  Box out = a;
  for (int i = 0; i < a.dim(); ++i) {
    out.lo[i] = std::max(a.lo[i], b.lo[i]);
    out.hi[i] = std::min(a.hi[i], b.hi[i]);
    if (out.lo[i] > out.hi[i]) out.hi[i] = out.lo[i];
  }
  return out;
}

}  // namespace detail

// Residual of the co-area identity
//   int_V g(z) u(Lambda_x(z)) dz = int_U u(y) mu^{x,y}(g) dy
// with the V side on a midpoint grid and the U side through per-point fiber
// quadrature. A small residual certifies the fiber measures.
inline double verify_coarea(const FilteredChart& chart, const Vec& x, const BallFunction& g,
                            const DomainFunction& u, long budget, std::uint64_t seed, FiberOptions fopt = {}) {
  const int N = chart.space().dim();
  const int d = chart.dim();
  const double rg = std::min(g.support_radius, chart.epsilon());

  int n_axis = std::clamp(static_cast<int>(std::lround(std::pow(static_cast<double>(budget), 1.0 / N))), 8, 512);
  Box vbox = chart.space().ball_box(rg);
  double lhs = detail::midpoint_integrate(vbox, n_axis, [&](const Vec& z) {
    double gz = g(z);
    if (gz == 0.0) return 0.0;
    return gz * u(chart.exponential(x, z));
  });

  Rng rng(seed);
  Box ybox = detail::box_intersection(detail::image_box(chart, x, rg, rng.fork(1)), u.support);
  int m_axis = std::clamp(static_cast<int>(std::lround(std::pow(static_cast<double>(budget), 1.0 / std::max(N, d + 1)))), 8, 512);
  long y_cells = static_cast<long>(std::pow(m_axis, d));
  std::vector<double> contrib(static_cast<std::size_t>(y_cells), 0.0);
  Vec h = ybox.extent() / static_cast<double>(m_axis);
  double cell = 1.0;
  for (int i = 0; i < d; ++i) cell *= h[i];
  parallel_for(static_cast<std::size_t>(y_cells), [&](std::size_t k) {
    long rem = static_cast<long>(k);
    Vec y(d);
    for (int i = 0; i < d; ++i) {
      int ni = static_cast<int>(rem % m_axis);
      rem /= m_axis;
      y[i] = ybox.lo[i] + (ni + 0.5) * h[i];
    }
    double uy = u(y);
    if (uy == 0.0) return;
    FiberOptions fo = fopt;
    fo.seed = mix64(seed ^ (0x3c1 + static_cast<std::uint64_t>(k)));
    FiberQuadrature fq = fiber_quadrature(chart, x, y, rg, fo);
    if (fq.empty()) return;
    contrib[k] = uy * fq.integrate([&](const Vec& z) { return g(z); });
  });
  double rhs = 0.0;
  for (double c : contrib) rhs += c;
  rhs *= cell;
  return std::abs(lhs - rhs);
}

struct SymmetryCheck {
  double forward = 0.0;   // mu^{x,y}(g)
  double backward = 0.0;  // mu^{y,x}(g(-.))
  double residual = 0.0;
};

// |mu^{x,y}(g) - mu^{y,x}(g(-.))|, both sides with independent seeds.
inline SymmetryCheck fiber_symmetry_check(const FilteredChart& chart, const Vec& x, const Vec& y,
                                          const BallFunction& g, std::uint64_t seed, FiberOptions fopt = {}) {
  const double r = std::min(g.support_radius, chart.epsilon() * 0.999);
  FiberOptions f1 = fopt, f2 = fopt;
  f1.seed = mix64(seed ^ 0x11);
  f2.seed = mix64(seed ^ 0x22);
  SymmetryCheck out;
  FiberQuadrature a = fiber_quadrature(chart, x, y, r, f1);
  FiberQuadrature b = fiber_quadrature(chart, y, x, r, f2);
  out.forward = a.integrate([&](const Vec& z) { return g(z); });
  out.backward = b.integrate([&](const Vec& z) { return g((-z).eval()); });
  out.residual = std::abs(out.forward - out.backward);
  return out;
}

}  // namespace fcalc
