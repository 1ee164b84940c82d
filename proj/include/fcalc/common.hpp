#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fcalc {

// Small dense types. Chart dimension d and layer count N stay tiny (desk
// scale is N <= 6), so everything lives on the stack.
constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Complex = std::complex<double>;
using CVec = Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Error taxonomy. Anything that signals misuse of an interface is
// std::invalid_argument; runtime numerical failures get their own types so
// callers can map them onto report entries.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrajectoryLeftDomain : Error {
  using Error::Error;
};
struct StepSizeUnderflow : Error {
  using Error::Error;
};
struct RankDeficient : Error {
  using Error::Error;
};
struct SingularGram : Error {
  using Error::Error;
};
struct FlowEscapedBall : Error {
  using Error::Error;
};
struct DomainExit : Error {
  using Error::Error;
};
struct ChartTooLarge : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  ConfigError(const std::string& msg, int line = 0)
      : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_number(line) {}
  int line_number;
};

// Axis-aligned box, used for chart domains and quadrature supports.
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Vec& p, double pad = 0.0) const {
    for (int i = 0; i < dim(); ++i) {
      if (p[i] < lo[i] - pad || p[i] > hi[i] + pad) return false;
    }
    return true;
  }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
  }

  Vec center() const { return 0.5 * (lo + hi); }
  Vec extent() const { return hi - lo; }

  Box padded(const Vec& pad) const { return Box{lo - pad, hi + pad}; }
  Box padded(double pad) const {
    Vec p = Vec::Constant(dim(), pad);
    return padded(p);
  }

  // Shrink towards the center by the given per-axis fraction of the half-extent.
  Box shrunk(double fraction) const {
    Vec c = center();
    Vec h = 0.5 * extent() * (1.0 - fraction);
    return Box{c - h, c + h};
  }

  static Box cube(int dim, double lo_v, double hi_v) {
    return Box{Vec::Constant(dim, lo_v), Vec::Constant(dim, hi_v)};
  }
};

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace fcalc
