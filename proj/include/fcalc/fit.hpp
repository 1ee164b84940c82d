#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace fcalc {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares y ~ intercept + slope * x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  std::size_t n = x.size();
  if (n < 2 || y.size() != n) return f;
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

inline double log2_safe(double v) { return v > 0 ? std::log2(v) : -1074.0; }

// Slope of log2(values) against log2(scales); the workhorse for fitting the
// power laws of measured constants across dyadic scale lists.
inline LineFit fit_log2_slope(const std::vector<double>& scales, const std::vector<double>& values) {
  std::vector<double> lx, ly;
  lx.reserve(scales.size());
  ly.reserve(values.size());
  for (std::size_t i = 0; i < scales.size() && i < values.size(); ++i) {
    if (scales[i] > 0 && values[i] > 0) {
      lx.push_back(std::log2(scales[i]));
      ly.push_back(std::log2(values[i]));
    }
  }
  return fit_line(lx, ly);
}

}  // namespace fcalc
