#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nami/copula.hpp"
#include "nami/inference.hpp"
#include "nami/joint.hpp"

namespace nami {

enum class OutcomeKind { continuous, binary, survival };

std::string_view to_string(OutcomeKind k);
OutcomeKind outcome_kind_from_string(std::string_view name);

/// `standard` draws four covariates (chi-squared 5, t 2, t 3, t 4); `single`
/// draws one standard normal covariate with a continuous outcome.
enum class SimDesign { standard, single };

struct SimConfig {
  SimDesign design = SimDesign::standard;
  OutcomeKind outcome = OutcomeKind::continuous;
  double tau = 0.5;
  /// Predictive entry of the first covariate.
  double gamma = 0.0;
  /// Covariate-covariate entries (standard design).
  double lambda_covariates = 0.25;
  /// Covariate-outcome entries.
  double lambda_outcome = 0.25;
  int n_per_arm = 41;
  int replications = 1000;
  std::uint64_t seed = 1;
  /// Target fraction of censored survival times.
  double censor_target = 0.7;
  int threads = 1;
  int bernstein_order = 6;
  Multiplicity gamma_multiplicity = Multiplicity::max_t;
  int max_t_draws = 100000;
  bool fit_mi = true;
  bool fit_nami = true;

  void validate() const;
};

/// True data-generating process and the models fitted to each replication.
///
/// Latent vectors are generated with the outcome first: every covariate
/// loads on the outcome (lambda_outcome, plus gamma for X1 in the treated
/// arm) and on the covariates before it (lambda_covariates). The matrices
/// below are stored in model order, covariates first and the outcome last.
struct Dgp {
  SimConfig config;
  int dim = 0;
  /// Latent correlation matrix per arm.
  std::array<Eigen::MatrixXd, 2> correlation;
  /// Lower-triangular Omega per arm with Omega * Sigma * Omega^T = I.
  std::array<Eigen::MatrixXd, 2> omega;
  /// Offset added to the log censoring times, calibrated so the expected censoring
  /// fraction matches censor_target. Survival outcomes only.
  double censor_offset = 0.0;
  JointSpec nami_spec;
  MarginalSpec mi_spec;
};

Dgp build_dgp(const SimConfig& config);

/// One arm of simulated data with the latent draws behind it.
struct ArmDraw {
  JointData data;
  Eigen::MatrixXd latent;
  int censored = 0;
};

/// Draws n rows of one arm. Survival outcomes are right-censored by times
/// from gen_censoring.
ArmDraw sample_arm(const Dgp& dgp, int arm, int n, std::mt19937_64& rng);

/// Log censoring times for latent covariates `latent` (n x J) in `arm`.
Eigen::VectorXd gen_censoring(const Dgp& dgp, const Eigen::MatrixXd& latent, int arm, std::mt19937_64& rng);

struct FitRecord {
  bool ok = false;
  double tau = 0.0;
  double se = 0.0;
  bool reject = false;
  double gradient_norm = 0.0;
  double hessian_asymmetry = 0.0;
  std::string error;
};

struct ReplicationRecord {
  int index = 0;
  std::uint64_t seed = 0;
  double censor_fraction = 0.0;
  FitRecord mi;
  FitRecord nami;
  /// Copula estimates of the NAMI-HTE fit: lambda (outcome row) and gamma.
  Eigen::VectorXd lambda_hat;
  Eigen::VectorXd lambda_se;
  Eigen::VectorXd gamma_hat;
  Eigen::VectorXd gamma_se;
  double gamma_p = 1.0;
  bool gamma_reject = false;
};

struct ModelSummary {
  int fits = 0;
  int failures = 0;
  double mean_tau = 0.0;
  double sd_tau = 0.0;
  double mean_se = 0.0;
  double median_se = 0.0;
  double reject_rate = 0.0;
  double max_gradient_norm = 0.0;
  double max_asymmetry = 0.0;
};

struct SimSummary {
  SimConfig config;
  int replications = 0;
  ModelSummary mi;
  ModelSummary nami;
  double mean_gamma1 = 0.0;
  double gamma_reject_rate = 0.0;
  double mean_censor_fraction = 0.0;
  /// False when more than 5% of fits failed.
  bool valid = true;
};

ReplicationRecord run_replication(const Dgp& dgp, int index);
SimSummary summarize(const SimConfig& config, const std::vector<ReplicationRecord>& records);

struct StudyResult {
  SimSummary summary;
  std::vector<ReplicationRecord> records;
};

/// Runs every replication (in parallel when config.threads > 1). Records are
/// returned in index order and do not depend on scheduling.
StudyResult run_study(const SimConfig& config);

/// One row of the single-covariate consistency comparison.
struct ConsistencyRow {
  TheoryPoint point;
  int fits = 0;
  int failures = 0;
  /// Order (lambda, gamma, tau).
  Eigen::Vector3d theory_se;
  Eigen::Vector3d mean_se;
  Eigen::Vector3d empirical_sd;
  Eigen::Vector3d mean_estimate;
  Eigen::Vector3d relative_deviation;
  double max_gradient_norm = 0.0;
  double max_asymmetry = 0.0;
};

ConsistencyRow consistency_study(const TheoryPoint& point, int replications, std::uint64_t seed,
                                 int threads = 1);

}  // namespace nami
