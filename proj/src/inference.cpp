#include "nami/inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nami/error.hpp"
#include "nami/numeric.hpp"

namespace nami {

namespace {

void check_n(int n) {
  if (n < 1) throw InputError("sample size per arm must be positive");
}

double adjusted_term(double lambda, double gamma) {
  return (gamma * gamma + 4.0) / (2.0 * lambda * lambda + 2.0 * lambda * gamma + gamma * gamma + 2.0);
}

}  // namespace

double se_lemma1(double tau, int n) {
  check_n(n);
  return std::sqrt((tau * tau / 4.0 + 2.0) / n);
}

double se_lemma4(const TheoryPoint& p) {
  check_n(p.n_per_arm);
  return std::sqrt((p.tau * p.tau / 4.0 + adjusted_term(p.lambda, p.gamma)) / p.n_per_arm);
}

Eigen::Matrix3d var_matrix_theory(const TheoryPoint& p) {
  check_n(p.n_per_arm);
  const double l = p.lambda, g = p.gamma, t = p.tau;
  Eigen::Matrix3d v;
  v(0, 0) = (l * l + 2.0) / 2.0;
  v(1, 1) = (g * g + 4.0) / 2.0;
  v(2, 2) = t * t / 4.0 + adjusted_term(l, g);
  v(0, 1) = v(1, 0) = (g * l - 2.0) / 2.0;
  v(0, 2) = v(2, 0) = -l * t / 4.0;
  v(1, 2) = v(2, 1) = -g * t / 4.0;
  return v / p.n_per_arm;
}

double efficiency_ratio(double tau, double lambda, double gamma) {
  const double unadj = tau * tau / 4.0 + 2.0;
  return (tau * tau / 4.0 + adjusted_term(lambda, gamma)) / unadj;
}

double latent_rho(double l) { return -l / std::sqrt(1.0 + l * l); }

TestResult wald_test(double estimate, double se, double null_value, double z_crit) {
  if (!(se > 0.0) || !std::isfinite(se)) throw InputError("standard error must be positive and finite");
  TestResult r;
  r.estimate = estimate;
  r.se = se;
  r.z = (estimate - null_value) / se;
  r.p_raw = std::min(1.0, 2.0 * normal_cdf(-std::fabs(r.z)));
  r.p_adjusted = r.p_raw;
  r.ci_lo = estimate - z_crit * se;
  r.ci_hi = estimate + z_crit * se;
  return r;
}

std::string_view to_string(Multiplicity m) {
  switch (m) {
    case Multiplicity::none:
      return "none";
    case Multiplicity::bonferroni:
      return "bonferroni";
    case Multiplicity::max_t:
      return "maxt";
  }
  return "unknown";
}

Multiplicity multiplicity_from_string(std::string_view name) {
  if (name == "none") return Multiplicity::none;
  if (name == "bonferroni") return Multiplicity::bonferroni;
  if (name == "maxt" || name == "max_t" || name == "max_t_mc") return Multiplicity::max_t;
  throw ConfigError("unknown multiplicity method '" + std::string(name) + "'");
}

std::vector<double> adjust_bonferroni(const std::vector<double>& p_raw) {
  std::vector<double> out;
  const double m = static_cast<double>(p_raw.size());
  for (double p : p_raw) out.push_back(std::min(1.0, m * p));
  return out;
}

std::vector<double> adjust_max_t(const std::vector<double>& z, const Eigen::MatrixXd& covariance,
                                 const MaxTOptions& options) {
  const auto m = static_cast<Eigen::Index>(z.size());
  if (covariance.rows() != m || covariance.cols() != m) throw InputError("covariance has the wrong size");
  if (options.draws < 1) throw InputError("max-t adjustment needs at least one draw");
  if (m == 0) return {};
  const Eigen::VectorXd sd = covariance.diagonal().cwiseSqrt();
  if (!(sd.minCoeff() > 0.0)) throw NumericalError("covariance has a non-positive variance");
  Eigen::MatrixXd corr = sd.cwiseInverse().asDiagonal() * covariance * sd.cwiseInverse().asDiagonal();
  corr = 0.5 * (corr + corr.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-10)
    throw NumericalError("covariance of the tested estimates is not positive semidefinite");
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  std::vector<double> abs_z;
  for (double v : z) abs_z.push_back(std::fabs(v));
  std::vector<long> exceed(z.size(), 0);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> norm;
  Eigen::VectorXd e(m);
  for (int d = 0; d < options.draws; ++d) {
    for (Eigen::Index i = 0; i < m; ++i) e[i] = norm(rng);
    const double mx = (root * e).cwiseAbs().maxCoeff();
    for (std::size_t k = 0; k < z.size(); ++k)
      if (mx >= abs_z[k]) ++exceed[k];
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double raw = std::min(1.0, 2.0 * normal_cdf(-abs_z[k]));
    out.push_back(std::max(raw, static_cast<double>(exceed[k]) / options.draws));
  }
  return out;
}

std::vector<TestResult> test_family(const Eigen::VectorXd& estimates, const Eigen::MatrixXd& covariance,
                                    Multiplicity method, const MaxTOptions& options) {
  std::vector<TestResult> out;
  std::vector<double> p, z;
  for (Eigen::Index i = 0; i < estimates.size(); ++i) {
    out.push_back(wald_test(estimates[i], std::sqrt(covariance(i, i))));
    p.push_back(out.back().p_raw);
    z.push_back(out.back().z);
  }
  std::vector<double> adj = p;
  if (method == Multiplicity::bonferroni) adj = adjust_bonferroni(p);
  if (method == Multiplicity::max_t) adj = adjust_max_t(z, covariance, options);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].p_adjusted = adj[i];
  return out;
}

}  // namespace nami
