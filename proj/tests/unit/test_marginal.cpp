#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "nami/error.hpp"
#include "nami/inference.hpp"
#include "nami/marginal.hpp"
#include "nami/numeric.hpp"

using namespace nami;

namespace {

MarginalModel probit_identity(double tau) {
  MarginalModel m;
  m.basis = TransformationBasis::linear(0.0, 1.0);
  m.link = LinkFunction(LinkKind::probit);
  m.tau = Eigen::VectorXd::Constant(1, tau);
  return m;
}

std::vector<Observation> normal_arms(int n, double tau, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::vector<Observation> out;
  for (int arm = 0; arm < 2; ++arm)
    for (int i = 0; i < n; ++i) out.push_back({Datum::exact(n01(rng) + arm * tau), arm});
  return out;
}

}  // namespace

TEST_CASE("links are tail accurate and consistent") {
  for (auto kind : {LinkKind::probit, LinkKind::logit, LinkKind::cloglog}) {
    LinkFunction g(kind);
    for (double u : {-30.0, -5.0, -0.3, 0.0, 0.8, 4.0, 30.0}) {
      if (g.cdf(u) > 1e-300 && g.survivor(u) > 1e-10)
        CHECK(g.quantile(g.cdf(u)) == doctest::Approx(u).epsilon(1e-8));
      CHECK(g.cdf(u) + g.survivor(u) == doctest::Approx(1.0));
      if (std::abs(u) <= 5.0) {
        const double fd = (g.cdf(u + 1e-6) - g.cdf(u - 1e-6)) / 2e-6;
        CHECK(g.density(u) == doctest::Approx(fd).epsilon(1e-6));
      }
      CHECK(std::exp(g.log_density(u)) == doctest::Approx(g.density(u)).epsilon(1e-12));
    }
  }
  CHECK(LinkFunction(LinkKind::cloglog).cdf(0.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(LinkFunction(LinkKind::logit).survivor(40.0) == doctest::Approx(std::exp(-40.0)).epsilon(1e-12));
}

TEST_CASE("marginal_cdf examples") {
  CHECK(marginal_cdf(probit_identity(0.5), 0.5, 1) == doctest::Approx(0.5).epsilon(1e-15));

  MarginalModel bin;
  bin.basis = TransformationBasis::step(Eigen::VectorXd::Zero(1));
  bin.link = LinkFunction(LinkKind::logit);
  bin.tau = Eigen::VectorXd::Zero(1);
  CHECK(marginal_cdf(bin, 1, 0) == doctest::Approx(0.5).epsilon(1e-15));

  MarginalModel weib;
  weib.basis = TransformationBasis::linear(0.0, 1.0, true);
  weib.link = LinkFunction(LinkKind::cloglog);
  weib.tau = Eigen::VectorXd::Zero(1);
  CHECK(marginal_cdf(weib, 1.0, 0) == doctest::Approx(0.63212).epsilon(1e-5));
}

TEST_CASE("to_latent examples") {
  CHECK(to_latent(probit_identity(0.5), 1.0, 1).z == doctest::Approx(0.5).epsilon(1e-15));

  MarginalModel weib;
  weib.basis = TransformationBasis::linear(0.0, 1.0, true);
  weib.link = LinkFunction(LinkKind::cloglog);
  weib.tau = Eigen::VectorXd::Zero(1);
  CHECK(to_latent(weib, 1.0, 0).z == doctest::Approx(normal_quantile(1.0 - std::exp(-1.0))).epsilon(1e-12));
  CHECK(to_latent(weib, 1.0, 0).z == doctest::Approx(0.33747).epsilon(1e-4));

  MarginalModel bin;
  bin.basis = TransformationBasis::step(Eigen::VectorXd::Zero(1));
  bin.link = LinkFunction(LinkKind::logit);
  bin.tau = Eigen::VectorXd::Zero(1);
  const LatentInterval iv = latent_interval(bin, Datum::category_of(1), 0);
  CHECK(std::isinf(iv.lo));
  CHECK(iv.hi == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("probit to_latent collapses to h minus tau") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 200; ++i) {
    const double tau = n01(rng);
    MarginalModel m = probit_identity(tau);
    m.basis = TransformationBasis::linear(n01(rng), std::exp(n01(rng)));
    const double y = n01(rng);
    CHECK(to_latent(m, y, 1).z == m.basis.eval(y) - tau);
  }
}

TEST_CASE("latent_interval examples") {
  const auto m = probit_identity(0.0);
  const LatentInterval exact = latent_interval(m, Datum::exact(0.7), 0);
  CHECK(exact.lo == 0.7);
  CHECK(exact.hi == 0.7);

  const double lo = normal_quantile(0.7);
  const LatentInterval rc = latent_interval(m, Datum::right_censored(lo), 0);
  CHECK(rc.lo == doctest::Approx(0.52440).epsilon(1e-5));
  CHECK(std::isinf(rc.hi));

  MarginalModel bin;
  bin.basis = TransformationBasis::step(Eigen::VectorXd::Constant(1, 0.3));
  bin.link = LinkFunction(LinkKind::logit);
  bin.tau = Eigen::VectorXd::Constant(1, 0.2);
  const LatentInterval top = latent_interval(bin, Datum::category_of(2), 1);
  CHECK(top.lo == doctest::Approx(normal_quantile(expit(0.1))).epsilon(1e-12));
  CHECK(std::isinf(top.hi));
}

TEST_CASE("marginal_loglik examples") {
  const auto m = probit_identity(0.0);
  std::vector<Observation> one{{Datum::exact(0.0), 0}};
  CHECK(marginal_loglik(m, one) == doctest::Approx(-0.91894).epsilon(1e-5));

  std::vector<Observation> cens{{Datum::right_censored(normal_quantile(0.7)), 0}};
  CHECK(marginal_loglik(m, cens) == doctest::Approx(std::log(0.3)).epsilon(1e-12));

  std::vector<Observation> miss{{Datum::missing(), 1}};
  CHECK(marginal_loglik(m, miss) == 0.0);
}

TEST_CASE("exact log-likelihood is the log derivative of the cdf") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  for (auto kind : {LinkKind::probit, LinkKind::logit, LinkKind::cloglog}) {
    MarginalModel m;
    m.link = LinkFunction(kind);
    m.basis = TransformationBasis::bernstein((Eigen::VectorXd(4) << -1.5, -0.3, 0.4, 1.8).finished(),
                                             {-1.0, 2.5}, true);
    m.tau = Eigen::VectorXd::Constant(1, 0.4);
    for (int i = 0; i < 20; ++i) {
      const double y = std::exp(-0.8 + 3.0 * (i + 0.5) / 20.0);
      const int arm = i % 2;
      const double step = 1e-5 * y;
      const double dens = (marginal_cdf(m, y + step, arm) - marginal_cdf(m, y - step, arm)) / (2.0 * step);
      std::vector<Observation> obs{{Datum::exact(y), arm}};
      CHECK(marginal_loglik(m, obs) == doctest::Approx(std::log(dens)).epsilon(1e-5));
    }
  }
}

TEST_CASE("marginal_cdf is a valid cdf in every arm") {
  MarginalModel m;
  m.link = LinkFunction(LinkKind::logit);
  m.basis = TransformationBasis::linear(0.2, 1.3);
  m.tau = (Eigen::VectorXd(2) << 0.5, -1.0).finished();
  for (int arm = 0; arm < 3; ++arm) {
    double prev = 0.0;
    for (double y = -40.0; y <= 40.0; y += 0.25) {
      const double f = marginal_cdf(m, y, arm);
      CHECK(f >= prev);
      prev = f;
    }
    CHECK(marginal_cdf(m, -40.0, arm) < 1e-20);
    CHECK(marginal_cdf(m, 40.0, arm) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("auc_from_tau") {
  CHECK(auc_from_tau(0.0) == 0.5);
  CHECK(auc_from_tau(0.5) == doctest::Approx(0.63817).epsilon(1e-5));
  CHECK(auc_from_tau(60.0) == doctest::Approx(1.0));
}

TEST_CASE("fit_marginal recovers a normal shift with the analytic standard error") {
  MarginalSpec spec;
  spec.basis = BasisKind::linear;
  std::mt19937_64 rng(2024);
  auto data = normal_arms(2000, 0.5, rng);
  const MarginalFit fit = fit_marginal(spec, data);
  CHECK(fit.convergence.converged);
  CHECK(fit.convergence.gradient_norm <= 1e-5);
  CHECK(fit.model.tau[0] == doctest::Approx(0.5).epsilon(0.1));
  // se(tau) = sqrt((tau^2/4 + 2) / N) for the normal model.
  CHECK(fit.tau_se(0) == doctest::Approx(std::sqrt((0.0625 + 2.0) / 2000.0)).epsilon(0.05));

  std::mt19937_64 rng0(4);
  const MarginalFit null = fit_marginal(spec, normal_arms(20000, 0.0, rng0));
  CHECK(std::abs(null.model.tau[0]) < 3.0 * null.tau_se(0));
}

TEST_CASE("fit_marginal bias and Wald size under the null") {
  MarginalSpec spec;
  spec.basis = BasisKind::linear;
  const int reps = 10000;
  double sum = 0.0, sum2 = 0.0, sum_se = 0.0;
  int rejects = 0;
  std::mt19937_64 rng(77);
  for (int r = 0; r < reps; ++r) {
    const MarginalFit fit = fit_marginal(spec, normal_arms(41, 0.5, rng));
    REQUIRE(fit.convergence.converged);
    const double t = fit.model.tau[0];
    sum += t;
    sum2 += t * t;
    sum_se += fit.tau_se(0);
    const MarginalFit null = fit_marginal(spec, normal_arms(41, 0.0, rng));
    if (std::abs(null.model.tau[0] / null.tau_se(0)) > kZ975) ++rejects;
  }
  const double mean = sum / reps;
  const double sd = std::sqrt(sum2 / reps - mean * mean);
  // Mean SE at N = 41 per arm is 0.225.
  CHECK(sum_se / reps == doctest::Approx(0.225).epsilon(0.02));
  // Bias below two Monte Carlo standard errors of a 1000 replication study.
  CHECK(std::abs(mean - 0.5) < 2.0 * sd / std::sqrt(1000.0));
  const double size = double(rejects) / reps;
  CHECK(size >= 0.04);
  CHECK(size <= 0.06);
}

TEST_CASE("fit_marginal handles censored survival data and ordinal data") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Observation> surv;
  int censored = 0;
  for (int arm = 0; arm < 2; ++arm) {
    for (int i = 0; i < 1500; ++i) {
      // Weibull with log-linear cloglog model: log T = (log(-log U) + tau w) / 2.
      const double t = std::exp((std::log(-std::log(unif(rng))) + 0.5 * arm) / 2.0);
      const double c = std::exp(std::log(-std::log(unif(rng))) / 2.0 + 0.3);
      if (c < t) {
        surv.push_back({Datum::right_censored(c), arm});
        ++censored;
      } else {
        surv.push_back({Datum::exact(t), arm});
      }
    }
  }
  MarginalSpec spec;
  spec.basis = BasisKind::linear;
  spec.log_scale = true;
  spec.link = LinkKind::cloglog;
  const MarginalFit fit = fit_marginal(spec, surv);
  CHECK(fit.convergence.converged);
  CHECK(censored > 0);
  // F_w(t) = 1 - exp(-exp(2 log t - 0.5 w)): slope 2 and shift 0.5 under this sign convention.
  CHECK(fit.model.basis.coefficients()[1] == doctest::Approx(2.0).epsilon(0.1));
  CHECK(std::abs(fit.model.tau[0] - 0.5) < 4.0 * fit.tau_se(0));

  std::vector<Observation> ord;
  for (int arm = 0; arm < 2; ++arm)
    for (int i = 0; i < 1500; ++i) {
      const double z = logit(unif(rng)) + 0.7 * arm;
      ord.push_back({Datum::category_of(z < -0.5 ? 1 : z < 1.0 ? 2 : 3), arm});
    }
  MarginalSpec ospec;
  ospec.basis = BasisKind::step;
  ospec.categories = 3;
  ospec.link = LinkKind::logit;
  const MarginalFit ofit = fit_marginal(ospec, ord);
  CHECK(ofit.convergence.converged);
  CHECK(ofit.model.basis.coefficients()[0] == doctest::Approx(-0.5).epsilon(0.3));
  CHECK(std::abs(ofit.model.tau[0] - 0.7) < 4.0 * ofit.tau_se(0));
}

TEST_CASE("identifiability problems are reported") {
  MarginalSpec spec;
  spec.basis = BasisKind::linear;
  std::vector<Observation> constant{{Datum::exact(1.0), 0}, {Datum::exact(1.0), 1},
                                    {Datum::exact(1.0), 0}, {Datum::exact(1.0), 1}};
  CHECK_THROWS_AS(fit_marginal(spec, constant), Error);
  std::vector<Observation> empty;
  CHECK_THROWS_AS(fit_marginal(spec, empty), IdentifiabilityError);
}
