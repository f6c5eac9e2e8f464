#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nami/basis.hpp"
#include "nami/link.hpp"
#include "nami/optimize.hpp"

namespace nami {

/// One observed value of a variable, possibly censored or missing.
/// Ordinal values are 1-based category indices.
struct Datum {
  enum class Kind { exact, right_censored, left_censored, interval, category, missing };

  Kind kind = Kind::missing;
  double lo = 0.0;
  double hi = 0.0;
  int category = 0;

  static Datum exact(double v) { return {Kind::exact, v, v, 0}; }
  /// Event time known to exceed `lo`.
  static Datum right_censored(double lo) { return {Kind::right_censored, lo, 0.0, 0}; }
  /// Value known to be at most `hi`.
  static Datum left_censored(double hi) { return {Kind::left_censored, 0.0, hi, 0}; }
  static Datum interval(double lo, double hi);
  static Datum category_of(int k) { return {Kind::category, 0.0, 0.0, k}; }
  static Datum missing() { return {}; }

  bool is_missing() const { return kind == Kind::missing; }
  bool operator==(const Datum&) const = default;
};

/// Total order used to canonicalize row order before summing likelihoods.
bool datum_less(const Datum& a, const Datum& b);

struct Observation {
  Datum datum;
  int arm = 0;
};

enum class Role { outcome, covariate };

/// F_w(y) = G(h(y) - tau_w), tau_0 = 0.
struct MarginalModel {
  TransformationBasis basis = TransformationBasis::linear(0.0, 1.0);
  LinkFunction link;
  /// One shift per non-control arm; empty for covariates.
  Eigen::VectorXd tau;
  Role role = Role::outcome;

  double shift(int arm) const;
  int arms() const { return static_cast<int>(tau.size()) + 1; }
};

double marginal_cdf(const MarginalModel& model, double y, int arm);

/// Phi^-1(G(h(y) - tau_arm)). Clamped to +-8 when G is exactly 0 or 1.
Latent to_latent(const MarginalModel& model, double y, int arm);

struct LatentInterval {
  double lo = 0.0;
  double hi = 0.0;
  /// Exact data only: log g(u) + log h'(y) - log phi(z), the change of
  /// variables from y to the latent normal scale.
  double log_jacobian = 0.0;
  bool clamped = false;
};

LatentInterval latent_interval(const MarginalModel& model, const Datum& datum, int arm);

/// Log-likelihood of the univariate model. Missing data contribute zero.
double marginal_loglik(const MarginalModel& model, std::span<const Observation> data);

/// How to build and fit one marginal model.
struct MarginalSpec {
  BasisKind basis = BasisKind::linear;
  int order = 6;
  /// Number of categories for step bases.
  int categories = 2;
  bool log_scale = false;
  Positivity positivity = Positivity::softplus;
  LinkKind link = LinkKind::probit;
  int arms = 2;
  Role role = Role::outcome;
  double support_expand = 0.05;
  /// Overrides the data-driven Bernstein support.
  std::optional<Support> support;

  Eigen::Index coefficient_count() const;
  /// Number of shift parameters (arms - 1 for outcomes, 0 for covariates).
  int shift_count() const { return role == Role::outcome ? arms - 1 : 0; }
};

/// Bernstein support for the spec over the finite values in `data`.
Support data_support(const MarginalSpec& spec, std::span<const Datum> data);
/// Model with the given unconstrained parameter vector (basis raw, then shifts).
MarginalModel model_from_raw(const MarginalSpec& spec, const Support& support,
                             const Eigen::VectorXd& raw);
/// Data-driven starting values for the unconstrained parameter vector.
Eigen::VectorXd initial_raw(const MarginalSpec& spec, const Support& support,
                            std::span<const Observation> data);

struct Convergence {
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  /// Sup-norm of the gradient of the per-observation log-likelihood.
  double gradient_norm = 0.0;
  /// Relative asymmetry of the numeric Hessian before symmetrization.
  double hessian_asymmetry = 0.0;
  std::string status;
};

struct MarginalFit {
  MarginalSpec spec;
  MarginalModel model;
  Eigen::VectorXd raw;
  double loglik = 0.0;
  /// Inverse observed information for (basis coefficients, shifts).
  Eigen::MatrixXd covariance;
  Convergence convergence;
  int observations = 0;

  Eigen::VectorXd standard_errors() const { return covariance.diagonal().cwiseSqrt(); }
  double tau_se(int k) const;
};

struct FitOptions {
  OptimOptions optim;
  bool compute_covariance = true;
  /// Warm start for the unconstrained parameter vector.
  std::optional<Eigen::VectorXd> start;
};

MarginalFit fit_marginal(const MarginalSpec& spec, std::span<const Observation> data,
                         const FitOptions& options = {});

/// P(Y0 < Y1) for the probit shift tau: Phi(tau / sqrt 2).
double auc_from_tau(double tau);

}  // namespace nami
