#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fcalc/common.hpp"
#include "fcalc/graded.hpp"
#include "fcalc/rng.hpp"

namespace fcalc {

// Multivariate polynomial with exact partial derivatives. Vector fields come
// from a closed-form registry of these, so spatial derivatives carry no
// discretization error.
class Polynomial {
 public:
  struct Term {
    double coef;
    std::array<int, kMaxDim> expo;  // exponents per input axis
  };

  explicit Polynomial(int dim_in = 0) : dim_in_(dim_in) {}

  static Polynomial constant(int dim_in, double c) {
    Polynomial p(dim_in);
    if (c != 0.0) p.terms_.push_back({c, {}});
    return p;
  }

  static Polynomial monomial(int dim_in, double c, std::initializer_list<int> expo) {
    Polynomial p(dim_in);
    Term t{c, {}};
    int i = 0;
    for (int e : expo) t.expo[static_cast<std::size_t>(i++)] = e;
    if (c != 0.0) p.terms_.push_back(t);
    return p;
  }

  int dim_in() const { return dim_in_; }
  bool empty() const { return terms_.empty(); }

  double eval(const Vec& x) const {
    double s = 0.0;
    for (const Term& t : terms_) {
      double m = t.coef;
      for (int i = 0; i < dim_in_; ++i) {
        for (int k = 0; k < t.expo[static_cast<std::size_t>(i)]; ++k) m *= x[i];
      }
      s += m;
    }
    return s;
  }

  Polynomial partial(int axis) const {
    Polynomial d(dim_in_);
    for (const Term& t : terms_) {
      int e = t.expo[static_cast<std::size_t>(axis)];
      if (e == 0) continue;
      Term dt = t;
      dt.coef = t.coef * e;
      dt.expo[static_cast<std::size_t>(axis)] = e - 1;
      d.terms_.push_back(dt);
    }
    return d;
  }

 private:
  int dim_in_;
  std::vector<Term> terms_;
};

// Smooth vector field on R^d with exact first spatial derivatives.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(std::vector<Polynomial> components) : comp_(std::move(components)) {
    const int d = static_cast<int>(comp_.size());
    dcomp_.resize(comp_.size());
    for (int i = 0; i < d; ++i) {
      dcomp_[static_cast<std::size_t>(i)].reserve(static_cast<std::size_t>(d));
      for (int a = 0; a < d; ++a) dcomp_[static_cast<std::size_t>(i)].push_back(comp_[static_cast<std::size_t>(i)].partial(a));
    }
  }

  int dim() const { return static_cast<int>(comp_.size()); }

  Vec eval(const Vec& x) const {
    Vec v(dim());
    for (int i = 0; i < dim(); ++i) v[i] = comp_[static_cast<std::size_t>(i)].eval(x);
    return v;
  }

  // d x d spatial derivative matrix, entry (i,a) = d(component_i)/d(x_a).
  Mat derivative(const Vec& x) const {
    Mat m(dim(), dim());
    for (int i = 0; i < dim(); ++i)
      for (int a = 0; a < dim(); ++a) m(i, a) = dcomp_[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)].eval(x);
    return m;
  }

 private:
  std::vector<Polynomial> comp_;
  std::vector<std::vector<Polynomial>> dcomp_;
};

struct ChartOptions {
  int ode_steps = 64;           // fixed RK4 step count for the exponential map
  double rank_tol = 1e-8;       // spanning / Jacobian rank threshold
  double jacobian_step = 1e-6;  // central-difference base step in z
  int validation_samples = 64;  // probe count for the constructor checks
  std::uint64_t validation_seed = 0x5eedc4a7;
  double flow_pad_factor = 1.30;  // slack on the measured trajectory range
  bool validate = true;
};

// Chart-level geometry: domain U in R^d, N >= d spanning vector fields with
// graded weights, and the uniform exponential radius epsilon. Immutable after
// construction; all member calls are const and thread-safe.
class FilteredChart {
 public:
  FilteredChart(GradedSpace space, Box domain, std::vector<VectorField> fields, double epsilon,
                ChartOptions options = {})
      : space_(std::move(space)),
        domain_(std::move(domain)),
        fields_(std::move(fields)),
        epsilon_(epsilon),
        opt_(options) {
    if (static_cast<int>(fields_.size()) != space_.dim())
      throw std::invalid_argument("FilteredChart: need one field per graded direction");
    if (!(epsilon_ > 0)) throw std::invalid_argument("FilteredChart: epsilon must be positive");
    dim_ = domain_.dim();
    if (dim_ > space_.dim()) throw std::invalid_argument("FilteredChart: d must be <= N");
    for (const VectorField& f : fields_) {
      if (f.dim() != dim_) throw std::invalid_argument("FilteredChart: field dimension mismatch");
    }
    flow_box_ = domain_.padded(domain_.extent() * 0.5);  // provisional until probing
    if (opt_.validate) {
      probe_flow_box();
      validate_spanning();
    } else {
      flow_box_ = domain_.padded(10.0);
    }
  }

  const GradedSpace& space() const { return space_; }
  const Box& domain() const { return domain_; }
  const Box& flow_box() const { return flow_box_; }
  double epsilon() const { return epsilon_; }
  int dim() const { return dim_; }
  int layers() const { return space_.dim(); }
  const ChartOptions& options() const { return opt_; }

  // The frame combination z -> sum_j z_j X_j evaluated at x.
  Vec sharp(const Vec& z, const Vec& x) const {
    Vec v = Vec::Zero(dim_);
    for (int j = 0; j < space_.dim(); ++j) {
      if (z[j] != 0.0) v += z[j] * fields_[static_cast<std::size_t>(j)].eval(x);
    }
    return v;
  }

  // x-derivative of the frame combination (for variational oracles and the
  // constructor checks).
  Mat sharp_derivative(const Vec& z, const Vec& x) const {
    Mat m = Mat::Zero(dim_, dim_);
    for (int j = 0; j < space_.dim(); ++j) {
      if (z[j] != 0.0) m += z[j] * fields_[static_cast<std::size_t>(j)].derivative(x);
    }
    return m;
  }

  Vec field_value(int j, const Vec& x) const { return fields_[static_cast<std::size_t>(j)].eval(x); }

  // Time-1 flow of the frame combination: classical RK4, fixed step count.
  // Throws TrajectoryLeftDomain if the path exits the probed flow box.
  Vec exponential(const Vec& x, const Vec& z, int steps = 0) const {
    if (z.size() != space_.dim()) throw std::invalid_argument("exponential: z length mismatch");
    if (space_.homogeneous_norm(z) > epsilon_ * 1.05)
      throw std::invalid_argument("exponential: |z|_V exceeds chart radius");
    const int n = steps > 0 ? steps : opt_.ode_steps;
    const double h = 1.0 / n;
    if (!(h > 0.0) || !std::isfinite(h)) throw StepSizeUnderflow("exponential: step size underflow");
    Vec y = x;
    for (int i = 0; i < n; ++i) {
      Vec k1 = sharp(z, y);
      Vec k2 = sharp(z, y + 0.5 * h * k1);
      Vec k3 = sharp(z, y + 0.5 * h * k2);
      Vec k4 = sharp(z, y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!flow_box_.contains(y)) throw TrajectoryLeftDomain("exponential: trajectory left the chart box");
    }
    return y;
  }

  // One Richardson halving check: returns the halved-step result together
  // with the |coarse - fine| discrepancy, an a-posteriori error estimate.
  std::pair<Vec, double> exponential_checked(const Vec& x, const Vec& z) const {
    Vec coarse = exponential(x, z, opt_.ode_steps);
    Vec fine = exponential(x, z, 2 * opt_.ode_steps);
    return {fine, (coarse - fine).norm()};
  }

  // Jacobian of z -> exponential(x, z): d x N by central differences in z.
  Mat jacobian(const Vec& x, const Vec& z) const {
    const int N = space_.dim();
    Mat J(dim_, N);
    const double h = opt_.jacobian_step * std::max(1.0, z.norm());
    Vec zp = z, zm = z;
    for (int k = 0; k < N; ++k) {
      zp[k] = z[k] + h;
      zm[k] = z[k] - h;
      J.col(k) = (exponential(x, zp) - exponential(x, zm)) / (2.0 * h);
      zp[k] = z[k];
      zm[k] = z[k];
    }
    return J;
  }

  // Smallest singular value of the Jacobian; rank guard for submersion use.
  static double smallest_singular_value(const Mat& J) {
    Eigen::JacobiSVD<Mat> svd(J);
    return svd.singularValues()[svd.singularValues().size() - 1];
  }

  // |D Lambda| = det(J J^T)^{1/2}; the fiber-measure normalizer.
  double coarea_weight(const Vec& x, const Vec& z) const { return coarea_weight_of(jacobian(x, z)); }

  double coarea_weight_of(const Mat& J) const {
    if (smallest_singular_value(J) < opt_.rank_tol)
      throw RankDeficient("coarea_weight: Jacobian nearly rank deficient");
    Mat G = J * J.transpose();
    double det = G.determinant();
    return std::sqrt(std::max(det, 0.0));
  }

  Vec random_domain_point(Rng& rng) const {
    Vec p(dim_);
    for (int i = 0; i < dim_; ++i) p[i] = rng.uniform(domain_.lo[i], domain_.hi[i]);
    return p;
  }

 private:
  void probe_flow_box() {
    // Trace trajectories for |z|_V = epsilon from sampled base points and pad
    // the visited range; the box doubles as the left-domain guard.
    Rng rng(opt_.validation_seed);
    Vec lo = domain_.lo, hi = domain_.hi;
    Box wide = domain_.padded(domain_.extent() * 4.0 + Vec::Constant(dim_, 4.0 * epsilon_ + 1.0));
    Box save = flow_box_;
    flow_box_ = wide;
    for (int s = 0; s < opt_.validation_samples; ++s) {
      Rng stream = rng.fork(static_cast<std::uint64_t>(s));
      Vec x = random_domain_point(stream);
      Vec z = space_.sample_sphere_point(epsilon_ * 0.999, stream);
      try {
        Vec y = x;
        const int n = opt_.ode_steps;
        const double h = 1.0 / n;
        for (int i = 0; i < n; ++i) {
          Vec k1 = sharp(z, y);
          Vec k2 = sharp(z, y + 0.5 * h * k1);
          Vec k3 = sharp(z, y + 0.5 * h * k2);
          Vec k4 = sharp(z, y + h * k3);
          y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
          if (!wide.contains(y))
            throw ValidationError("FilteredChart: epsilon too large, probe trajectory escaped");
          for (int c = 0; c < dim_; ++c) {
            lo[c] = std::min(lo[c], y[c]);
            hi[c] = std::max(hi[c], y[c]);
          }
        }
      } catch (const ValidationError&) {
        throw;
      }
    }
    flow_box_ = save;
    Vec pad = (hi - lo) * (opt_.flow_pad_factor - 1.0) + Vec::Constant(dim_, 1e-6);
    flow_box_ = Box{lo - pad, hi + pad};
  }

  void validate_spanning() {
    Rng rng(mix64(opt_.validation_seed ^ 0x77));
    for (int s = 0; s < opt_.validation_samples; ++s) {
      Rng stream = rng.fork(static_cast<std::uint64_t>(s));
      Vec x = random_domain_point(stream);
      Mat frame(dim_, space_.dim());
      for (int j = 0; j < space_.dim(); ++j) frame.col(j) = fields_[static_cast<std::size_t>(j)].eval(x);
      if (smallest_singular_value(frame) < opt_.rank_tol)
        throw ValidationError("FilteredChart: fields do not span the tangent space on the domain");
    }
  }

  GradedSpace space_;
  Box domain_;
  Box flow_box_;
  std::vector<VectorField> fields_;
  double epsilon_;
  ChartOptions opt_;
  int dim_ = 0;
};

}  // namespace fcalc
