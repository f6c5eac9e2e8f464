#include "nami/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "nami/error.hpp"
#include "nami/numeric.hpp"

namespace nami {

std::string_view to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::continuous:
      return "continuous";
    case OutcomeKind::binary:
      return "binary";
    case OutcomeKind::survival:
      return "survival";
  }
  return "unknown";
}

OutcomeKind outcome_kind_from_string(std::string_view name) {
  if (name == "continuous") return OutcomeKind::continuous;
  if (name == "binary") return OutcomeKind::binary;
  if (name == "survival") return OutcomeKind::survival;
  throw ConfigError("unknown outcome kind '" + std::string(name) + "'");
}

void SimConfig::validate() const {
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (n_per_arm < 2) throw ConfigError("n_per_arm must be at least 2");
  if (!(censor_target >= 0.0 && censor_target < 1.0)) throw ConfigError("censor_target must lie in [0, 1)");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (bernstein_order < 1) throw ConfigError("bernstein_order must be at least 1");
  if (max_t_draws < 1) throw ConfigError("max_t_draws must be at least 1");
  if (design == SimDesign::single && outcome != OutcomeKind::continuous)
    throw ConfigError("the single-covariate design supports continuous outcomes only");
  for (double v : {tau, gamma, lambda_covariates, lambda_outcome})
    if (!std::isfinite(v)) throw ConfigError("simulation parameters must be finite");
}

namespace {

MarginalSpec outcome_spec(const SimConfig& c) {
  MarginalSpec s;
  s.role = Role::outcome;
  s.arms = 2;
  switch (c.outcome) {
    case OutcomeKind::continuous:
      s.basis = BasisKind::linear;
      s.link = LinkKind::probit;
      break;
    case OutcomeKind::binary:
      s.basis = BasisKind::step;
      s.categories = 2;
      s.link = LinkKind::logit;
      break;
    case OutcomeKind::survival:
      s.basis = BasisKind::bernstein;
      s.order = c.bernstein_order;
      s.log_scale = true;
      s.link = LinkKind::cloglog;
      break;
  }
  return s;
}

// log(-log(1 - Phi(z))): the cloglog quantile of Phi(z).
double cloglog_of_latent(double z) {
  const double s = z < 0.0 ? -std::log1p(-normal_cdf(z)) : -std::log(normal_cdf(-z));
  return std::log(s);
}

// Inverse of cloglog_of_latent: Phi^{-1}(1 - exp(-exp(t))).
double latent_of_cloglog(double t) { return -normal_quantile(std::exp(-std::exp(t))); }

// P(C < Y) in one arm when the latent outcome is mu + sigma * e with mu ~ N(0, 1 - sigma^2)
// and the censoring time reuses mu with its own residual draw.
double censoring_probability(double offset, double sigma) {
  using Rule = boost::math::quadrature::gauss<double, 64>;
  const double m = std::sqrt(std::max(0.0, 1.0 - sigma * sigma));
  auto given_mu = [&](double mu) {
    return Rule::integrate(
        [&](double e) {
          const double zc = latent_of_cloglog(cloglog_of_latent(mu + sigma * e) + offset);
          return normal_pdf(e) * normal_cdf((mu - zc) / sigma);
        },
        -8.0, 8.0);
  };
  if (m < 1e-12) return given_mu(0.0);
  return Rule::integrate([&](double u) { return normal_pdf(u) * given_mu(m * u); }, -8.0, 8.0);
}

// Offset whose expected censoring fraction, averaged over arms, equals the target.
// Without covariate dependence this is logit(1 - target).
double calibrate_censor_offset(double target, const std::array<double, 2>& sigma) {
  if (target <= 0.0) return kInf;
  auto excess = [&](double offset) {
    return 0.5 * (censoring_probability(offset, sigma[0]) + censoring_probability(offset, sigma[1])) - target;
  };
  const double start = logit(1.0 - target);
  double lo = start - 1.0, hi = start + 1.0;
  while (excess(lo) < 0.0) lo -= 1.0;
  while (excess(hi) > 0.0) hi += 1.0;
  boost::uintmax_t iterations = 100;
  const auto root = boost::math::tools::toms748_solve(excess, lo, hi, boost::math::tools::eps_tolerance<double>(50),
                                                      iterations);
  return 0.5 * (root.first + root.second);
}

}  // namespace

Dgp build_dgp(const SimConfig& config) {
  config.validate();
  Dgp d;
  d.config = config;
  const int covariates = config.design == SimDesign::standard ? 4 : 1;
  const int J = covariates + 1;
  d.dim = J;
  for (int arm = 0; arm < 2; ++arm) {
    // Generative factor in the order (Y, X1, ..., Xk).
    Eigen::MatrixXd lam = Eigen::MatrixXd::Identity(J, J);
    for (int r = 1; r < J; ++r) {
      lam(r, 0) = config.lambda_outcome + (r == 1 && arm == 1 ? config.gamma : 0.0);
      for (int c = 1; c < r; ++c) lam(r, c) = config.lambda_covariates;
    }
    const Eigen::MatrixXd inv = lam.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(J, J));
    Eigen::MatrixXd sigma = inv * inv.transpose();
    const Eigen::VectorXd sd = sigma.diagonal().cwiseSqrt().cwiseInverse();
    sigma = sd.asDiagonal() * sigma * sd.asDiagonal();
    Eigen::VectorXi order(J);
    for (int j = 0; j < covariates; ++j) order[j] = j + 1;
    order[J - 1] = 0;
    Eigen::MatrixXd model(J, J);
    for (int a = 0; a < J; ++a)
      for (int b = 0; b < J; ++b) model(a, b) = a == b ? 1.0 : sigma(order[a], order[b]);
    const Eigen::MatrixXd chol = model.llt().matrixL();
    d.correlation[arm] = model;
    d.omega[arm] = chol.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(J, J));
  }
  if (config.outcome == OutcomeKind::survival) {
    const int y = J - 1;
    d.censor_offset =
        calibrate_censor_offset(config.censor_target, {1.0 / d.omega[0](y, y), 1.0 / d.omega[1](y, y)});
  }

  d.mi_spec = outcome_spec(config);
  d.nami_spec.arms = 2;
  for (int j = 0; j < covariates; ++j) {
    MarginalSpec s;
    s.role = Role::covariate;
    s.link = LinkKind::probit;
    if (config.design == SimDesign::standard) {
      s.basis = BasisKind::bernstein;
      s.order = config.bernstein_order;
    } else {
      s.basis = BasisKind::linear;
    }
    d.nami_spec.marginals.push_back(s);
    d.nami_spec.names.push_back("X" + std::to_string(j + 1));
  }
  d.nami_spec.marginals.push_back(d.mi_spec);
  d.nami_spec.names.push_back("Y");
  return d;
}

namespace {

// Quantile of the covariate distribution at Phi(z), taking the upper tail
// from the complement.
double covariate_from_latent(SimDesign design, int j, double z) {
  if (design == SimDesign::single) return z;
  const bool upper = z > 0.0;
  const double p = normal_cdf(upper ? -z : z);
  if (j == 0) {
    const boost::math::chi_squared dist(5.0);
    return upper ? quantile(complement(dist, p)) : quantile(dist, p);
  }
  const boost::math::students_t dist(static_cast<double>(j + 1));
  return upper ? quantile(complement(dist, p)) : quantile(dist, p);
}

}  // namespace

Eigen::VectorXd gen_censoring(const Dgp& dgp, const Eigen::MatrixXd& latent, int arm, std::mt19937_64& rng) {
  const int J = dgp.dim;
  const Eigen::MatrixXd& omega = dgp.omega[arm];
  const double wjj = omega(J - 1, J - 1);
  std::normal_distribution<double> norm;
  Eigen::VectorXd out(latent.rows());
  for (Eigen::Index i = 0; i < latent.rows(); ++i) {
    const double s = omega.row(J - 1).head(J - 1).dot(latent.row(i).head(J - 1));
    const double zc = (norm(rng) - s) / wjj;
    out[i] = cloglog_of_latent(zc) + dgp.censor_offset + dgp.config.tau * arm;
  }
  return out;
}

ArmDraw sample_arm(const Dgp& dgp, int arm, int n, std::mt19937_64& rng) {
  const SimConfig& c = dgp.config;
  const int J = dgp.dim;
  ArmDraw out;
  const Eigen::MatrixXd chol = dgp.correlation[arm].llt().matrixL();
  Eigen::MatrixXd eps(n, J);
  std::normal_distribution<double> norm;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < J; ++j) eps(i, j) = norm(rng);
  out.latent = eps * chol.transpose();
  out.data.columns.assign(static_cast<std::size_t>(J), {});
  out.data.arm.assign(static_cast<std::size_t>(n), arm);
  for (int j = 0; j + 1 < J; ++j)
    for (int i = 0; i < n; ++i)
      out.data.columns[j].push_back(Datum::exact(covariate_from_latent(c.design, j, out.latent(i, j))));

  auto& y = out.data.columns[J - 1];
  const double shift = c.tau * arm;
  switch (c.outcome) {
    case OutcomeKind::continuous:
      for (int i = 0; i < n; ++i) y.push_back(Datum::exact(out.latent(i, J - 1) + shift));
      break;
    case OutcomeKind::binary: {
      const double cut = normal_quantile(expit(-shift));
      for (int i = 0; i < n; ++i) y.push_back(Datum::category_of(out.latent(i, J - 1) <= cut ? 1 : 2));
      break;
    }
    case OutcomeKind::survival: {
      const Eigen::VectorXd log_c = gen_censoring(dgp, out.latent, arm, rng);
      for (int i = 0; i < n; ++i) {
        const double log_y = cloglog_of_latent(out.latent(i, J - 1)) + shift;
        if (log_c[i] < log_y) {
          y.push_back(Datum::right_censored(std::exp(log_c[i])));
          ++out.censored;
        } else {
          y.push_back(Datum::exact(std::exp(log_y)));
        }
      }
      break;
    }
  }
  return out;
}

ReplicationRecord run_replication(const Dgp& dgp, int index) {
  const SimConfig& c = dgp.config;
  ReplicationRecord rec;
  rec.index = index;
  rec.seed = mix_seed(c.seed, static_cast<std::uint64_t>(index));
  std::mt19937_64 rng(rec.seed);

  JointData data;
  int censored = 0;
  for (int arm = 0; arm < 2; ++arm) {
    ArmDraw d = sample_arm(dgp, arm, c.n_per_arm, rng);
    censored += d.censored;
    if (data.columns.empty()) data.columns.resize(d.data.columns.size());
    for (std::size_t j = 0; j < d.data.columns.size(); ++j)
      data.columns[j].insert(data.columns[j].end(), d.data.columns[j].begin(), d.data.columns[j].end());
    data.arm.insert(data.arm.end(), d.data.arm.begin(), d.data.arm.end());
  }
  rec.censor_fraction = static_cast<double>(censored) / static_cast<double>(data.rows());
  const int J = dgp.dim;

  if (c.fit_mi) {
    try {
      const MarginalFit fit = fit_marginal(dgp.mi_spec, data.observations(J - 1));
      const TestResult t = wald_test(fit.model.tau[0], fit.tau_se(0));
      rec.mi = {true, t.estimate, t.se, t.p_raw < 0.05, fit.convergence.gradient_norm,
                fit.convergence.hessian_asymmetry, {}};
    } catch (const Error& e) {
      rec.mi.error = e.what();
    }
  }

  if (c.fit_nami) {
    try {
      const JointFit fit = fit_joint(dgp.nami_spec, data);
      if (!fit.convergence.converged) throw ConvergenceError(fit.convergence.status, fit.raw, fit.loglik);
      if (fit.covariance.size() == 0) throw IdentifiabilityError("no covariance");
      const ParamLayout lay = fit.layout();
      const Eigen::Index ti = lay.tau_index(1);
      const TestResult t = wald_test(fit.raw[ti], fit.se(ti));
      rec.nami = {true, t.estimate, t.se, t.p_raw < 0.05, fit.convergence.gradient_norm,
                  fit.convergence.hessian_asymmetry, {}};
      const int m = J - 1;
      rec.lambda_hat.resize(m);
      rec.lambda_se.resize(m);
      rec.gamma_hat.resize(m);
      rec.gamma_se.resize(m);
      std::vector<Eigen::Index> gi;
      for (int j = 0; j < m; ++j) {
        const Eigen::Index li = lay.lambda_index(J - 1, j);
        rec.lambda_hat[j] = fit.raw[li];
        rec.lambda_se[j] = fit.se(li);
        gi.push_back(lay.gamma_index(1, j));
        rec.gamma_hat[j] = fit.raw[gi.back()];
        rec.gamma_se[j] = fit.se(gi.back());
      }
      Eigen::MatrixXd cov(m, m);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) cov(a, b) = fit.covariance(gi[a], gi[b]);
      const auto tests = test_family(rec.gamma_hat, cov, c.gamma_multiplicity,
                                     {c.max_t_draws, mix_seed(rec.seed, 0x9a77a)});
      rec.gamma_p = 1.0;
      for (const auto& r : tests) rec.gamma_p = std::min(rec.gamma_p, r.p_adjusted);
      rec.gamma_reject = rec.gamma_p < 0.05;
    } catch (const Error& e) {
      rec.nami = {};
      rec.nami.error = e.what();
    }
  }
  return rec;
}

namespace {

ModelSummary summarize_model(const std::vector<const FitRecord*>& fits, int total) {
  ModelSummary s;
  std::vector<double> tau, se;
  int rejects = 0;
  for (const FitRecord* f : fits) {
    if (!f->ok) continue;
    tau.push_back(f->tau);
    se.push_back(f->se);
    rejects += f->reject;
    s.max_gradient_norm = std::max(s.max_gradient_norm, f->gradient_norm);
    s.max_asymmetry = std::max(s.max_asymmetry, f->hessian_asymmetry);
  }
  s.fits = static_cast<int>(tau.size());
  s.failures = total - s.fits;
  if (s.fits == 0) return s;
  const double n = s.fits;
  s.mean_tau = compensated_sum(tau) / n;
  s.mean_se = compensated_sum(se) / n;
  double ss = 0.0;
  for (double t : tau) ss += (t - s.mean_tau) * (t - s.mean_tau);
  s.sd_tau = s.fits > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(se.begin(), se.end());
  const std::size_t h = se.size() / 2;
  s.median_se = se.size() % 2 ? se[h] : 0.5 * (se[h - 1] + se[h]);
  s.reject_rate = rejects / n;
  return s;
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

SimSummary summarize(const SimConfig& config, const std::vector<ReplicationRecord>& records) {
  SimSummary s;
  s.config = config;
  s.replications = static_cast<int>(records.size());
  std::vector<const FitRecord*> mi, nami;
  double censor = 0.0, gamma1 = 0.0;
  int gamma_rejects = 0;
  for (const auto& r : records) {
    mi.push_back(&r.mi);
    nami.push_back(&r.nami);
    censor += r.censor_fraction;
    if (r.nami.ok) {
      gamma1 += r.gamma_hat[0];
      gamma_rejects += r.gamma_reject;
    }
  }
  const int total = s.replications;
  if (config.fit_mi) s.mi = summarize_model(mi, total);
  if (config.fit_nami) s.nami = summarize_model(nami, total);
  if (total > 0) s.mean_censor_fraction = censor / total;
  if (s.nami.fits > 0) {
    s.mean_gamma1 = gamma1 / s.nami.fits;
    s.gamma_reject_rate = static_cast<double>(gamma_rejects) / s.nami.fits;
  }
  const double limit = 0.05 * total;
  s.valid = (!config.fit_mi || s.mi.failures <= limit) && (!config.fit_nami || s.nami.failures <= limit);
  return s;
}

StudyResult run_study(const SimConfig& config) {
  const Dgp dgp = build_dgp(config);
  StudyResult out;
  out.records.resize(static_cast<std::size_t>(config.replications));
  parallel_for(config.replications, config.threads,
               [&](int i) { out.records[i] = run_replication(dgp, i); });
  out.summary = summarize(config, out.records);
  return out;
}

ConsistencyRow consistency_study(const TheoryPoint& point, int replications, std::uint64_t seed, int threads) {
  SimConfig c;
  c.design = SimDesign::single;
  c.outcome = OutcomeKind::continuous;
  c.tau = point.tau;
  c.lambda_outcome = point.lambda;
  c.gamma = point.gamma;
  c.n_per_arm = point.n_per_arm;
  c.replications = replications;
  c.seed = seed;
  c.threads = threads;
  c.fit_mi = false;
  c.gamma_multiplicity = Multiplicity::none;
  const StudyResult study = run_study(c);

  ConsistencyRow row;
  row.point = point;
  row.theory_se = var_matrix_theory(point).diagonal().cwiseSqrt();
  row.mean_se.setZero();
  row.mean_estimate.setZero();
  Eigen::Vector3d sq = Eigen::Vector3d::Zero();
  for (const auto& r : study.records) {
    if (!r.nami.ok) continue;
    ++row.fits;
    const Eigen::Vector3d est(r.lambda_hat[0], r.gamma_hat[0], r.nami.tau);
    const Eigen::Vector3d se(r.lambda_se[0], r.gamma_se[0], r.nami.se);
    row.mean_estimate += est;
    sq += est.cwiseProduct(est);
    row.mean_se += se;
    row.max_gradient_norm = std::max(row.max_gradient_norm, r.nami.gradient_norm);
    row.max_asymmetry = std::max(row.max_asymmetry, r.nami.hessian_asymmetry);
  }
  row.failures = replications - row.fits;
  if (row.fits > 0) {
    const double n = row.fits;
    row.mean_estimate /= n;
    row.mean_se /= n;
    row.empirical_sd = ((sq - n * row.mean_estimate.cwiseProduct(row.mean_estimate)) / std::max(1.0, n - 1.0))
                           .cwiseMax(0.0)
                           .cwiseSqrt();
    row.relative_deviation = (row.mean_se - row.theory_se).cwiseQuotient(row.theory_se);
  }
  return row;
}

}  // namespace nami
