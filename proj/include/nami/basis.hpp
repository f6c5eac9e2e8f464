#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace nami {

enum class BasisKind { linear, bernstein, step };

/// Map from unconstrained increments to positive ones.
enum class Positivity { softplus, exp };

std::string_view to_string(BasisKind kind);
BasisKind basis_kind_from_string(std::string_view name);
std::string_view to_string(Positivity p);

/// Interval on the (optionally log-transformed) variable scale over which a
/// Bernstein basis is defined.
struct Support {
  double lo = 0.0;
  double hi = 1.0;
};

/// Support covering [min, max] of the data, widened by `expand` of the range on
/// each side. Values are on the basis' working scale (after any log).
Support support_from_range(double min, double max, double expand = 0.05);

/// A monotone transformation function h.
///
/// linear:    h(y) = c0 + c1 s,                  c1 > 0
/// bernstein: h(y) = sum_m c_m B_{m,M}(t),       c nondecreasing, t in [0,1]
/// step:      h(k) = c_k for categories 1..K-1,  c strictly increasing, h(K) = +inf
///
/// s is y or log(y) (`log_scale`), and t = (s - lo) / (hi - lo).
/// For the step kind the argument is a 1-based category index.
class TransformationBasis {
 public:
  static TransformationBasis linear(double intercept, double slope, bool log_scale = false);
  static TransformationBasis bernstein(Eigen::VectorXd coefficients, Support support,
                                       bool log_scale = false);
  static TransformationBasis step(Eigen::VectorXd cutpoints);

  BasisKind kind() const { return kind_; }
  const Eigen::VectorXd& coefficients() const { return coef_; }
  Eigen::Index size() const { return coef_.size(); }
  bool log_scale() const { return log_scale_; }
  const Support& support() const { return support_; }
  /// Bernstein order M (coefficients - 1); 0 for other kinds.
  int order() const;
  /// Number of categories K for a step basis.
  int categories() const { return static_cast<int>(coef_.size()) + 1; }

  /// Replace coefficients, validating the monotonicity invariant.
  TransformationBasis with_coefficients(Eigen::VectorXd coefficients) const;

  double eval(double y) const;
  /// Like eval, but Bernstein arguments outside the support are clamped to it.
  double eval_clamped(double y, bool* clamped = nullptr) const;
  double eval_deriv(double y) const;
  double invert(double z) const;

  /// Design vector a(y) with h(y) = a(y)' c (linear and bernstein only).
  Eigen::VectorXd design(double y) const;
  /// Design vector a'(y) with h'(y) = a'(y)' c.
  Eigen::VectorXd design_deriv(double y) const;
  /// Working-scale value s, clamped into the support when `clamp` is set.
  double working(double y, bool clamp = false) const;
  bool in_support(double y) const;

  bool valid() const;

 private:
  TransformationBasis() = default;

  BasisKind kind_ = BasisKind::linear;
  Eigen::VectorXd coef_;
  Support support_;
  bool log_scale_ = false;
};

/// Number of coefficients for a basis of the given kind.
/// `order` is the Bernstein order; `categories` the number of levels for step.
Eigen::Index coefficient_count(BasisKind kind, int order, int categories);

/// Map an unconstrained vector onto coefficients that satisfy the basis invariants.
Eigen::VectorXd constrain(const Eigen::VectorXd& raw, BasisKind kind,
                          Positivity positivity = Positivity::softplus);
/// Inverse of constrain.
Eigen::VectorXd unconstrain(const Eigen::VectorXd& coef, BasisKind kind,
                            Positivity positivity = Positivity::softplus);
/// Jacobian d coef / d raw (lower triangular).
Eigen::MatrixXd constrain_jacobian(const Eigen::VectorXd& raw, BasisKind kind,
                                   Positivity positivity = Positivity::softplus);
/// J' g for the Jacobian above, without forming it.
Eigen::VectorXd constrain_pullback(const Eigen::VectorXd& raw, const Eigen::VectorXd& grad_coef,
                                   BasisKind kind, Positivity positivity = Positivity::softplus);

}  // namespace nami
