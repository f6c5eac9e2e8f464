#include <cmath>
#include <random>

#include <doctest.h>

#include "nami/error.hpp"
#include "nami/inference.hpp"
#include "nami/numeric.hpp"

using namespace nami;

namespace {

// Closed forms written out independently of the library.
double se_lambda_only(double tau, double lambda, int n) { return std::sqrt((tau * tau / 4 + 2 / (lambda * lambda + 1)) / n); }
double se_gamma_only(double tau, double gamma, int n) {
  return std::sqrt((tau * tau / 4 + (gamma * gamma + 4) / (gamma * gamma + 2)) / n);
}

// Smallest |x| on [0, hi] with f(x) = target for f decreasing in x.
double bisect(const std::function<double(double)>& f, double target, double hi) {
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("unadjusted standard error values") {
  CHECK(se_lemma1(0.5, 41) == doctest::Approx(0.22429).epsilon(1e-4));
  CHECK(se_lemma1(0.0, 500) == doctest::Approx(0.06325).epsilon(1e-4));
  CHECK(se_lemma1(0.0, 500) == doctest::Approx(std::sqrt(2.0 / 500.0)).epsilon(1e-15));
  CHECK(se_lemma1(0.0, 2) == 1.0);
}

TEST_CASE("adjusted standard error reduces to its special cases") {
  CHECK(se_lemma4({0.5, 0.0, 0.0, 41}) == doctest::Approx(se_lemma1(0.5, 41)).epsilon(1e-15));
  CHECK(se_lemma4({0.5, 1.0, 0.0, 41}) == doctest::Approx(0.16098).epsilon(1e-4));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 200; ++i) {
    const double tau = n01(rng), l = n01(rng), g = n01(rng);
    CHECK(se_lemma4({tau, l, 0.0, 100}) == doctest::Approx(se_lambda_only(tau, l, 100)).epsilon(1e-14));
    CHECK(se_lemma4({tau, 0.0, g, 100}) == doctest::Approx(se_gamma_only(tau, g, 100)).epsilon(1e-14));
    CHECK(se_lemma4({tau, -g / 2, g, 37}) == doctest::Approx(se_lemma1(tau, 37)).epsilon(1e-14));
  }
}

TEST_CASE("adjusted standard error never exceeds the unadjusted one and is sign symmetric") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const TheoryPoint p{n01(rng), n01(rng), n01(rng), 1 + i % 500};
    const double adj = se_lemma4(p), raw = se_lemma1(p.tau, p.n_per_arm);
    CHECK(adj <= raw * (1.0 + 1e-15));
    // Equality only on lambda = -gamma / 2: the gap is (2 lambda + gamma)^2 / 2 in the denominator.
    const double denom = 2 * p.lambda * p.lambda + 2 * p.lambda * p.gamma + p.gamma * p.gamma + 2;
    CHECK(denom - (p.gamma * p.gamma + 4) / 2 == doctest::Approx(std::pow(2 * p.lambda + p.gamma, 2) / 2));
    if (std::abs(2 * p.lambda + p.gamma) > 1e-3) CHECK(adj < raw);
    CHECK(se_lemma4({p.tau, -p.lambda, -p.gamma, p.n_per_arm}) == adj);
  }
}

TEST_CASE("variance matrix") {
  const Eigen::Matrix3d v = var_matrix_theory({0.0, 0.0, 0.0, 1});
  CHECK(v(0, 0) == 1.0);
  CHECK(v(1, 1) == 2.0);
  CHECK(v(2, 2) == 2.0);
  CHECK(v(0, 1) == -1.0);
  CHECK(v(0, 2) == 0.0);
  CHECK(v(1, 2) == 0.0);
  CHECK(var_matrix_theory({0.3, 0.0, 0.7, 500})(0, 0) == doctest::Approx(1.0 / 500).epsilon(1e-15));
  CHECK(std::sqrt(var_matrix_theory({0.0, 0.0, 0.0, 500})(0, 0)) == doctest::Approx(0.04472).epsilon(1e-4));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 1000; ++i) {
    const TheoryPoint p{n01(rng), n01(rng), n01(rng), 1 + i % 100};
    const Eigen::Matrix3d m = var_matrix_theory(p);
    CHECK(m == m.transpose());
    const double s = se_lemma4(p);
    CHECK(std::abs(m(2, 2) - s * s) <= 1e-14);
    CHECK(m(0, 1) == doctest::Approx((p.gamma * p.lambda - 2) / 2 / p.n_per_arm));
    CHECK(m(0, 2) == doctest::Approx(-p.lambda * p.tau / 4 / p.n_per_arm));
    CHECK(m(1, 2) == doctest::Approx(-p.gamma * p.tau / 4 / p.n_per_arm));
  }
}

TEST_CASE("efficiency ratio") {
  CHECK(efficiency_ratio(0.5, 0.0, 0.0) == 1.0);
  CHECK(efficiency_ratio(1.3, -0.4, 0.8) == 1.0);
  const double l = bisect([](double x) { return efficiency_ratio(0.5, x, 0.0); }, 0.75, 10.0);
  CHECK(std::abs(latent_rho(l)) == doctest::Approx(0.51).epsilon(0.02));
  const double g = bisect([](double x) { return efficiency_ratio(0.5, 0.0, x); }, 0.75, 10.0);
  CHECK(std::abs(latent_rho(g)) == doctest::Approx(0.83).epsilon(0.01));
  CHECK(latent_rho(0.25) == doctest::Approx(-0.2425).epsilon(1e-3));

  for (double tau : {0.0, 0.5, 1.0}) {
    double prev_l = 2.0, prev_g = 2.0;
    for (double x = 0.0; x <= 5.0; x += 0.05) {
      const double rl = efficiency_ratio(tau, x, 0.0);
      const double rg = efficiency_ratio(tau, 0.0, x);
      CHECK(rl <= prev_l);
      CHECK(rg <= prev_g);
      CHECK(efficiency_ratio(tau, -x, 0.0) == rl);
      prev_l = rl;
      prev_g = rg;
    }
  }
}

TEST_CASE("wald test") {
  const TestResult zero = wald_test(0.0, 1.0);
  CHECK(zero.z == 0.0);
  CHECK(zero.p_raw == 1.0);
  CHECK(wald_test(-0.30, 0.09).p_raw == doctest::Approx(0.0005).epsilon(0.3));
  CHECK(wald_test(-0.30, 0.09).p_raw == doctest::Approx(2.0 * normal_cdf(-0.30 / 0.09)).epsilon(1e-12));
  CHECK(wald_test(1.96, 1.0).p_raw == doctest::Approx(0.05).epsilon(1e-3));
  const TestResult ci = wald_test(1.0, 0.5);
  CHECK(ci.ci_lo == doctest::Approx(1.0 - kZ975 * 0.5));
  CHECK(ci.ci_hi == doctest::Approx(1.0 + kZ975 * 0.5));
  CHECK(wald_test(2.0, 1.0, 2.0).p_raw == 1.0);
  CHECK_THROWS_AS(wald_test(1.0, 0.0), Error);
}

TEST_CASE("bonferroni") {
  CHECK(adjust_bonferroni({0.02}) == std::vector<double>{0.02});
  const auto adj = adjust_bonferroni({0.02, 0.02, 0.5, 0.01});
  CHECK(adj[0] == doctest::Approx(0.08));
  CHECK(adj[2] == 1.0);
  CHECK(adj[3] == doctest::Approx(0.04));
}

TEST_CASE("max-t adjustment") {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  for (double z : {0.5, 1.5, 2.2, 3.0}) {
    const double p = 2.0 * normal_cdf(-z);
    const double adj = adjust_max_t({z}, one, {100000, 5})[0];
    CHECK(std::abs(adj - p) <= 3.0 * std::sqrt(p * (1.0 - p) / 100000.0));
  }

  // Independent statistics: P(max |T| >= z) = 1 - (1 - p)^m.
  const Eigen::MatrixXd ind = Eigen::MatrixXd::Identity(4, 4) * 2.5;
  const std::vector<double> z{2.0, 0.3, -2.6, 1.0};
  const auto adj = adjust_max_t(z, ind, {200000, 9});
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double p = 2.0 * normal_cdf(-std::abs(z[k]));
    const double exact = 1.0 - std::pow(1.0 - p, 4);
    CHECK(std::abs(adj[k] - exact) <= 4.0 * std::sqrt(exact * (1.0 - exact) / 200000.0));
    CHECK(adj[k] >= p);
    CHECK(adj[k] <= adjust_bonferroni({p, p, p, p})[0] + 1e-3);
  }

  // Perfectly correlated statistics need no adjustment.
  const Eigen::MatrixXd same = Eigen::MatrixXd::Constant(3, 3, 1.0);
  const auto tied = adjust_max_t({2.0, 2.0, 2.0}, same, {50000, 2});
  CHECK(tied[0] == doctest::Approx(2.0 * normal_cdf(-2.0)).epsilon(0.05));

  CHECK(adjust_max_t(z, ind, {1000, 4}) == adjust_max_t(z, ind, {1000, 4}));
}

TEST_CASE("test families") {
  const Eigen::VectorXd est = (Eigen::VectorXd(2) << 0.5, -0.1).finished();
  const Eigen::MatrixXd cov = (Eigen::MatrixXd(2, 2) << 0.04, 0.01, 0.01, 0.09).finished();
  const auto none = test_family(est, cov, Multiplicity::none);
  CHECK(none[0].p_adjusted == none[0].p_raw);
  CHECK(none[0].se == doctest::Approx(0.2));
  const auto bonf = test_family(est, cov, Multiplicity::bonferroni);
  CHECK(bonf[0].p_adjusted == doctest::Approx(std::min(1.0, 2.0 * bonf[0].p_raw)));
  const auto maxt = test_family(est, cov, Multiplicity::max_t);
  CHECK(maxt[0].p_adjusted >= maxt[0].p_raw);
  CHECK(maxt[0].p_adjusted <= bonf[0].p_adjusted + 1e-3);
  CHECK(multiplicity_from_string("maxt") == Multiplicity::max_t);
  CHECK(multiplicity_from_string("bonferroni") == Multiplicity::bonferroni);
  CHECK_THROWS_AS(multiplicity_from_string("holm"), InputError);
}
