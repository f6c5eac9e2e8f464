#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nami/copula.hpp"
#include "nami/marginal.hpp"

namespace nami {

/// Variables in model order: covariates first, the outcome last.
struct JointSpec {
  std::vector<MarginalSpec> marginals;
  std::vector<std::string> names;
  int arms = 2;
  /// Allow discrete or censored covariates through a fixed-seed jitter
  /// within each latent interval instead of exact rectangle probabilities.
  bool discrete_approx = false;
  std::uint64_t approx_seed = 20240101;

  int dim() const { return static_cast<int>(marginals.size()); }
  /// Throws ConfigError when the spec is inconsistent.
  void validate() const;
};

/// Column-major dataset: one Datum per variable per row.
struct JointData {
  std::vector<std::vector<Datum>> columns;
  std::vector<int> arm;

  std::size_t rows() const { return arm.size(); }
  std::vector<Observation> observations(int variable) const;
};

/// Positions of each block in the joint raw parameter vector. Each variable
/// contributes its marginal raw block (basis, then shifts for the outcome),
/// followed by lambda and one gamma block per non-control arm.
struct ParamLayout {
  std::vector<Eigen::Index> offset;
  std::vector<Eigen::Index> size;
  Eigen::Index lambda_offset = 0;
  Eigen::Index gamma_offset = 0;
  Eigen::Index total = 0;
  int dim = 0;
  int arms = 0;

  explicit ParamLayout(const JointSpec& spec);

  /// Shift of non-control arm `arm` (1-based).
  Eigen::Index tau_index(int arm) const;
  Eigen::Index lambda_index(int row, int col) const;
  Eigen::Index gamma_index(int arm, int col) const;
};

struct JointModel {
  JointSpec spec;
  std::vector<Support> supports;
  std::vector<MarginalModel> marginals;
  CopulaParams copula;

  const MarginalModel& outcome() const { return marginals.back(); }
  OmegaFactor omega(int arm) const { return omega_for_arm(copula, arm); }
};

/// Supports of the Bernstein variables as determined from the data.
std::vector<Support> joint_supports(const JointSpec& spec, const JointData& data);
JointModel joint_model_from_raw(const JointSpec& spec, const std::vector<Support>& supports,
                                const Eigen::VectorXd& raw);
Eigen::VectorXd joint_raw_from_model(const JointModel& model);
/// Replaces each basis block of `raw` by its constrained coefficients. Shift,
/// lambda and gamma entries are unchanged.
Eigen::VectorXd theta_from_raw(const JointSpec& spec, const Eigen::VectorXd& raw);

/// Joint log-likelihood with design matrices precomputed for one dataset.
/// Rows are summed in a canonical order, so results do not depend on the
/// order of the input rows.
class JointLikelihood {
 public:
  JointLikelihood(const JointSpec& spec, const std::vector<Support>& supports,
                  const JointData& data);
  ~JointLikelihood();
  JointLikelihood(JointLikelihood&&) noexcept;

  /// Log-likelihood at `raw`; writes its gradient when `grad` is non-null.
  /// Returns -inf for infeasible parameters.
  double operator()(const Eigen::VectorXd& raw, Eigen::VectorXd* grad = nullptr) const;
  /// Same likelihood with basis blocks holding constrained coefficients
  /// directly; used for the observed information.
  double theta_loglik(const Eigen::VectorXd& theta, Eigen::VectorXd* grad = nullptr) const;
  /// Per-row contributions in input order.
  Eigen::VectorXd row_terms(const Eigen::VectorXd& raw) const;
  int rows() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double joint_loglik(const JointModel& model, const JointData& data);

struct JointFitOptions {
  OptimOptions optim;
  bool compute_covariance = true;
  /// Warm start for the full raw vector; skips stage 1.
  std::optional<Eigen::VectorXd> start;
};

struct JointFit {
  JointSpec spec;
  std::vector<Support> supports;
  JointModel model;
  Eigen::VectorXd raw;
  /// `raw` with basis blocks replaced by their coefficients.
  Eigen::VectorXd theta;
  double loglik = 0.0;
  /// Inverse observed information for `theta`; empty if unavailable.
  /// Coefficient space keeps the information regular when a monotonicity
  /// constraint is active.
  Eigen::MatrixXd covariance;
  Convergence convergence;
  int observations = 0;
  std::vector<MarginalFit> stage1;

  ParamLayout layout() const { return ParamLayout(spec); }
  double estimate(Eigen::Index i) const { return raw[i]; }
  double se(Eigen::Index i) const;
};

/// Stage 1 fits each marginal alone; stage 2 starts from lambda = gamma = 0
/// and maximizes the joint likelihood over every parameter.
JointFit fit_joint(const JointSpec& spec, const JointData& data, const JointFitOptions& options = {});

/// Delta-method covariance of f(copula) using the lambda/gamma block of the
/// fit covariance and a central-difference Jacobian.
Eigen::MatrixXd delta_method(const JointFit& fit,
                             const std::function<Eigen::VectorXd(const CopulaParams&)>& f);

/// P(Y <= y | X = x, W = arm) under the fitted model.
double conditional_cdf(const JointModel& model, double y, int arm, std::span<const double> covariates);

/// Max over `y_grid` of |E_X[conditional_cdf(y, arm, X)] - Phi(h_J(y | arm))|,
/// averaging over latent covariate draws from the fitted copula.
double marginal_recovery_check(const JointModel& model, int arm, std::span<const double> y_grid,
                               int draws = 100000, std::uint64_t seed = 1);

/// n draws of the latent vector Z = Omega(arm)^-1 eps, one per row.
Eigen::MatrixXd sample_latent(const CopulaParams& copula, int arm, int n, std::mt19937_64& rng);

struct JointSample {
  JointData data;
  Eigen::MatrixXd latent;
};

/// Draws n rows for one arm by mapping latent normals through the inverse
/// marginal transformations.
JointSample sample_joint(const JointModel& model, int arm, int n, std::uint64_t seed);

}  // namespace nami
