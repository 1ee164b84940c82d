#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fcalc/common.hpp"
#include "fcalc/rng.hpp"

namespace fcalc {

// Graded parameter space V = R^N with anisotropic dilations
// dilate(v,t)_j = t^{w_j} v_j and the homogeneous norm
// |v|_V = max_j |v_j|^{1/w_j}. With that norm, the ball B_V(0,r) is exactly
// the box prod_j [-r^{w_j}, r^{w_j}], which makes ball sampling and ball
// volumes exact.
class GradedSpace {
 public:
  explicit GradedSpace(std::vector<int> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw std::invalid_argument("GradedSpace: need at least one weight");
    int prev = 1;
    homogeneous_dimension_ = 0;
    for (int w : weights_) {
      if (w < 1) throw std::invalid_argument("GradedSpace: weights must be >= 1");
      if (w < prev) throw std::invalid_argument("GradedSpace: weights must be nondecreasing");
      prev = w;
      homogeneous_dimension_ += w;
    }
  }

  int dim() const { return static_cast<int>(weights_.size()); }
  int weight(int j) const { return weights_[static_cast<std::size_t>(j)]; }
  int max_weight() const { return weights_.back(); }
  const std::vector<int>& weights() const { return weights_; }
  int homogeneous_dimension() const { return homogeneous_dimension_; }

  Vec dilate(const Vec& v, double t) const {
    if (!(t > 0.0)) throw std::invalid_argument("dilate: scale must be positive");
    check_len(v);
    Vec out(dim());
    for (int j = 0; j < dim(); ++j) out[j] = std::pow(t, weights_[static_cast<std::size_t>(j)]) * v[j];
    return out;
  }

  double homogeneous_norm(const Vec& v) const {
    check_len(v);
    double m = 0.0;
    for (int j = 0; j < dim(); ++j) {
      double a = std::abs(v[j]);
      int w = weights_[static_cast<std::size_t>(j)];
      m = std::max(m, w == 1 ? a : std::pow(a, 1.0 / w));
    }
    return m;
  }

  // Lebesgue volume of B_V(0,r); det(dilate(.,t)) = t^Q forces r^Q scaling.
  double ball_volume(double r) const {
    double v = 1.0;
    for (int w : weights_) v *= 2.0 * std::pow(r, w);
    return v;
  }

  // Half-widths of the ball box: box_halfwidth(r)_j = r^{w_j}.
  Vec ball_halfwidth(double r) const {
    Vec h(dim());
    for (int j = 0; j < dim(); ++j) h[j] = std::pow(r, weights_[static_cast<std::size_t>(j)]);
    return h;
  }

  Box ball_box(double r) const {
    Vec h = ball_halfwidth(r);
    return Box{-h, h};
  }

  // One point uniform in B_V(0,r), a pure function of (rng stream, index).
  // Rejection from the bounding box; for the max-type norm the box equals the
  // ball so rejections only happen on the measure-zero boundary.
  Vec sample_ball_point(double r, Rng stream) const {
    Vec h = ball_halfwidth(r);
    for (int attempt = 0; attempt < 64; ++attempt) {
      Vec z(dim());
      for (int j = 0; j < dim(); ++j) z[j] = stream.uniform(-h[j], h[j]);
      if (homogeneous_norm(z) < r) return z;
    }
    return Vec::Zero(dim());
  }

  std::vector<Vec> sample_ball(double r, int count, std::uint64_t seed) const {
    if (!(r > 0.0)) throw std::invalid_argument("sample_ball: radius must be positive");
    if (count < 1) throw std::invalid_argument("sample_ball: count must be >= 1");
    Rng root(seed);
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) pts.push_back(sample_ball_point(r, root.fork(static_cast<std::uint64_t>(i))));
    return pts;
  }

  // Point with homogeneous norm exactly s: dilate a boundary direction.
  Vec sample_sphere_point(double s, Rng stream) const {
    Vec z = sample_ball_point(1.0, stream);
    double n = homogeneous_norm(z);
    if (n <= 0) {
      z = Vec::Zero(dim());
      z[0] = 1.0;
      n = 1.0;
    }
    return dilate(z, s / n);
  }

 private:
  void check_len(const Vec& v) const {
    if (v.size() != dim()) throw std::invalid_argument("GradedSpace: vector length mismatch");
  }

  std::vector<int> weights_;
  int homogeneous_dimension_ = 0;
};

}  // namespace fcalc
