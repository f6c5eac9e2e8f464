#include "nami/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nami/error.hpp"
#include "nami/numeric.hpp"

namespace nami {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// B_{m,M}(t) for m = 0..M.
Eigen::VectorXd bernstein_values(int order, double t) {
  Eigen::VectorXd b(order + 1);
  for (int m = 0; m <= order; ++m)
    b[m] = binomial(order, m) * std::pow(t, m) * std::pow(1.0 - t, order - m);
  return b;
}

double positive(double x, Positivity p) { return p == Positivity::exp ? std::exp(x) : softplus(x); }
double positive_inv(double x, Positivity p) {
  if (p == Positivity::exp) return x > 0.0 ? std::log(x) : -kInf;
  return softplus_inv(x);
}
double positive_deriv(double x, Positivity p) {
  return p == Positivity::exp ? std::exp(x) : softplus_deriv(x);
}

void require_finite(double y) {
  if (!std::isfinite(y)) throw InputError("transformation argument is not finite");
}

}  // namespace

std::string_view to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::linear:
      return "linear";
    case BasisKind::bernstein:
      return "bernstein";
    case BasisKind::step:
      return "step";
  }
  return "?";
}

BasisKind basis_kind_from_string(std::string_view name) {
  if (name == "linear") return BasisKind::linear;
  if (name == "bernstein") return BasisKind::bernstein;
  if (name == "step") return BasisKind::step;
  throw ConfigError("unknown basis '" + std::string(name) + "' (expected linear, bernstein or step)");
}

std::string_view to_string(Positivity p) { return p == Positivity::exp ? "exp" : "softplus"; }

Support support_from_range(double min, double max, double expand) {
  const double width = max - min;
  return {min - expand * width, max + expand * width};
}

TransformationBasis TransformationBasis::linear(double intercept, double slope, bool log_scale) {
  TransformationBasis b;
  b.kind_ = BasisKind::linear;
  b.coef_ = Eigen::Vector2d(intercept, slope);
  b.log_scale_ = log_scale;
  if (!b.valid()) throw InputError("linear transformation needs a strictly positive slope");
  return b;
}

TransformationBasis TransformationBasis::bernstein(Eigen::VectorXd coefficients, Support support,
                                                   bool log_scale) {
  TransformationBasis b;
  b.kind_ = BasisKind::bernstein;
  b.coef_ = std::move(coefficients);
  b.support_ = support;
  b.log_scale_ = log_scale;
  if (b.coef_.size() < 2) throw InputError("Bernstein basis needs order >= 1");
  if (!(support.lo < support.hi)) throw InputError("Bernstein support must be a nonempty interval");
  if (!b.valid()) throw InputError("Bernstein coefficients must be nondecreasing");
  return b;
}

TransformationBasis TransformationBasis::step(Eigen::VectorXd cutpoints) {
  TransformationBasis b;
  b.kind_ = BasisKind::step;
  b.coef_ = std::move(cutpoints);
  if (b.coef_.size() < 1) throw InputError("step basis needs at least one cutpoint");
  if (!b.valid()) throw InputError("step cutpoints must be strictly increasing");
  return b;
}

int TransformationBasis::order() const {
  return kind_ == BasisKind::bernstein ? static_cast<int>(coef_.size()) - 1 : 0;
}

bool TransformationBasis::valid() const {
  if (!coef_.allFinite()) return false;
  switch (kind_) {
    case BasisKind::linear:
      return coef_.size() == 2 && coef_[1] > 0.0;
    case BasisKind::bernstein:
      for (Eigen::Index i = 1; i < coef_.size(); ++i)
        if (coef_[i] < coef_[i - 1]) return false;
      return true;
    case BasisKind::step:
      for (Eigen::Index i = 1; i < coef_.size(); ++i)
        if (!(coef_[i] > coef_[i - 1])) return false;
      return true;
  }
  return false;
}

TransformationBasis TransformationBasis::with_coefficients(Eigen::VectorXd coefficients) const {
  TransformationBasis b = *this;
  b.coef_ = std::move(coefficients);
  if (b.coef_.size() != coef_.size()) throw InputError("coefficient vector has the wrong length");
  if (!b.valid()) throw InputError("coefficients violate the monotonicity constraint");
  return b;
}

double TransformationBasis::working(double y, bool clamp) const {
  double s = y;
  if (log_scale_) {
    if (!(y > 0.0)) throw DomainError("log-scale transformation needs a positive argument");
    s = std::log(y);
  }
  if (clamp && kind_ == BasisKind::bernstein) s = std::clamp(s, support_.lo, support_.hi);
  return s;
}

bool TransformationBasis::in_support(double y) const {
  if (kind_ != BasisKind::bernstein) return !log_scale_ || y > 0.0;
  if (log_scale_ && !(y > 0.0)) return false;
  const double s = log_scale_ ? std::log(y) : y;
  return s >= support_.lo && s <= support_.hi;
}

Eigen::VectorXd TransformationBasis::design(double y) const {
  require_finite(y);
  switch (kind_) {
    case BasisKind::linear:
      return Eigen::Vector2d(1.0, working(y));
    case BasisKind::bernstein: {
      if (!in_support(y)) {
        std::ostringstream msg;
        msg << "value " << y << " lies outside the Bernstein support [" << support_.lo << ", "
            << support_.hi << "]" << (log_scale_ ? " (log scale)" : "");
        throw DomainError(msg.str());
      }
      const double t = (working(y) - support_.lo) / (support_.hi - support_.lo);
      return bernstein_values(order(), t);
    }
    case BasisKind::step:
      throw UnsupportedError("step basis has no continuous design vector");
  }
  return {};
}

Eigen::VectorXd TransformationBasis::design_deriv(double y) const {
  require_finite(y);
  const double ds_dy = log_scale_ ? 1.0 / y : 1.0;
  switch (kind_) {
    case BasisKind::linear:
      working(y);
      return Eigen::Vector2d(0.0, ds_dy);
    case BasisKind::bernstein: {
      if (!in_support(y)) throw DomainError("value lies outside the Bernstein support");
      const int m_order = order();
      const double width = support_.hi - support_.lo;
      const double t = (working(y) - support_.lo) / width;
      const Eigen::VectorXd lower = bernstein_values(m_order - 1, t);
      Eigen::VectorXd a = Eigen::VectorXd::Zero(m_order + 1);
      for (int m = 0; m <= m_order; ++m) {
        const double left = m >= 1 ? lower[m - 1] : 0.0;
        const double right = m < m_order ? lower[m] : 0.0;
        a[m] = m_order / width * (left - right) * ds_dy;
      }
      return a;
    }
    case BasisKind::step:
      throw UnsupportedError("step basis has no derivative (discrete variable has no density)");
  }
  return {};
}

double TransformationBasis::eval(double y) const {
  require_finite(y);
  if (kind_ == BasisKind::step) {
    const double k = std::round(y);
    if (k != y || k < 1 || k > categories()) throw DomainError("invalid category index");
    if (k == categories()) return kInf;
    return coef_[static_cast<Eigen::Index>(k) - 1];
  }
  return design(y).dot(coef_);
}

double TransformationBasis::eval_clamped(double y, bool* clamped) const {
  const bool outside = kind_ == BasisKind::bernstein && !in_support(y);
  if (clamped) *clamped = outside;
  if (!outside) return eval(y);
  if (log_scale_ && !(y > 0.0)) return coef_[0];
  const double s = log_scale_ ? std::log(y) : y;
  return s < support_.lo ? coef_[0] : coef_[coef_.size() - 1];
}

double TransformationBasis::eval_deriv(double y) const { return design_deriv(y).dot(coef_); }

double TransformationBasis::invert(double z) const {
  if (std::isnan(z)) throw InputError("cannot invert a NaN value");
  switch (kind_) {
    case BasisKind::linear: {
      const double s = (z - coef_[0]) / coef_[1];
      return log_scale_ ? std::exp(s) : s;
    }
    case BasisKind::step: {
      for (Eigen::Index k = 0; k < coef_.size(); ++k)
        if (coef_[k] >= z) return static_cast<double>(k + 1);
      return static_cast<double>(categories());
    }
    case BasisKind::bernstein: {
      const double lo_val = coef_[0];
      const double hi_val = coef_[coef_.size() - 1];
      if (z < lo_val || z > hi_val) {
        std::ostringstream msg;
        msg << "value " << z << " outside the attainable range [" << lo_val << ", " << hi_val << "]";
        throw RangeError(msg.str());
      }
      auto h_at = [&](double t) { return bernstein_values(order(), t).dot(coef_); };
      double a = 0.0;
      double b = 1.0;
      for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
        const double mid = 0.5 * (a + b);
        if (h_at(mid) < z)
          a = mid;
        else
          b = mid;
      }
      const double t = std::fabs(h_at(a) - z) < std::fabs(h_at(b) - z) ? a : b;
      const double s = support_.lo + t * (support_.hi - support_.lo);
      return log_scale_ ? std::exp(s) : s;
    }
  }
  return 0.0;
}

Eigen::Index coefficient_count(BasisKind kind, int order, int categories) {
  switch (kind) {
    case BasisKind::linear:
      return 2;
    case BasisKind::bernstein:
      return order + 1;
    case BasisKind::step:
      return categories - 1;
  }
  return 0;
}

Eigen::VectorXd constrain(const Eigen::VectorXd& raw, BasisKind kind, Positivity positivity) {
  Eigen::VectorXd c(raw.size());
  if (raw.size() == 0) return c;
  if (kind == BasisKind::linear) {
    c[0] = raw[0];
    c[1] = positive(raw[1], positivity);
    return c;
  }
  c[0] = raw[0];
  for (Eigen::Index i = 1; i < raw.size(); ++i) c[i] = c[i - 1] + positive(raw[i], positivity);
  return c;
}

Eigen::VectorXd unconstrain(const Eigen::VectorXd& coef, BasisKind kind, Positivity positivity) {
  Eigen::VectorXd r(coef.size());
  if (coef.size() == 0) return r;
  if (kind == BasisKind::linear) {
    r[0] = coef[0];
    r[1] = positive_inv(coef[1], positivity);
    return r;
  }
  r[0] = coef[0];
  for (Eigen::Index i = 1; i < coef.size(); ++i)
    r[i] = positive_inv(coef[i] - coef[i - 1], positivity);
  return r;
}

Eigen::MatrixXd constrain_jacobian(const Eigen::VectorXd& raw, BasisKind kind,
                                   Positivity positivity) {
  const Eigen::Index n = raw.size();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  if (n == 0) return jac;
  if (kind == BasisKind::linear) {
    jac(0, 0) = 1.0;
    jac(1, 1) = positive_deriv(raw[1], positivity);
    return jac;
  }
  for (Eigen::Index m = 0; m < n; ++m) {
    jac(m, 0) = 1.0;
    for (Eigen::Index k = 1; k <= m; ++k) jac(m, k) = positive_deriv(raw[k], positivity);
  }
  return jac;
}

Eigen::VectorXd constrain_pullback(const Eigen::VectorXd& raw, const Eigen::VectorXd& grad_coef,
                                   BasisKind kind, Positivity positivity) {
  const Eigen::Index n = raw.size();
  Eigen::VectorXd g(n);
  if (n == 0) return g;
  if (kind == BasisKind::linear) {
    g[0] = grad_coef[0];
    g[1] = grad_coef[1] * positive_deriv(raw[1], positivity);
    return g;
  }
  double tail = 0.0;
  for (Eigen::Index k = n - 1; k >= 1; --k) {
    tail += grad_coef[k];
    g[k] = tail * positive_deriv(raw[k], positivity);
  }
  g[0] = tail + grad_coef[0];
  return g;
}

}  // namespace nami
