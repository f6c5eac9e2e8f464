#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace nami {

/// Parameters of the single-covariate normal-normal design for which the
/// closed-form standard errors hold.
struct TheoryPoint {
  double tau = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  int n_per_arm = 1;
};

/// Unadjusted SE of tau: sqrt((tau^2/4 + 2) / N).
double se_lemma1(double tau, int n);
/// SE of tau adjusted for one covariate and its treatment interaction.
double se_lemma4(const TheoryPoint& p);
/// Asymptotic covariance of (lambda, gamma, tau).
Eigen::Matrix3d var_matrix_theory(const TheoryPoint& p);
/// (SE adjusted / SE unadjusted)^2; independent of N.
double efficiency_ratio(double tau, double lambda, double gamma);
/// Latent correlation -(l)/sqrt(1 + l^2) between covariate and outcome for
/// last-row entry l.
double latent_rho(double l);

inline constexpr double kZ975 = 1.959964;

struct TestResult {
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Two-sided Wald test; CI = estimate +- z_crit * se.
TestResult wald_test(double estimate, double se, double null_value = 0.0, double z_crit = kZ975);

enum class Multiplicity { none, bonferroni, max_t };

std::string_view to_string(Multiplicity m);
Multiplicity multiplicity_from_string(std::string_view name);

struct MaxTOptions {
  int draws = 100000;
  std::uint64_t seed = 1;
};

/// Bonferroni-adjusted p values: min(1, m p).
std::vector<double> adjust_bonferroni(const std::vector<double>& p_raw);

/// Single-step max-t adjusted p values: P(max_i |T_i| >= |z_k|) with T drawn
/// from N(0, R), R the correlation matrix of `covariance`. Never below the
/// raw p value.
std::vector<double> adjust_max_t(const std::vector<double>& z, const Eigen::MatrixXd& covariance,
                                 const MaxTOptions& options = {});

/// Wald tests for a family of estimates with the chosen adjustment filled in.
std::vector<TestResult> test_family(const Eigen::VectorXd& estimates, const Eigen::MatrixXd& covariance,
                                    Multiplicity method, const MaxTOptions& options = {});

}  // namespace nami
