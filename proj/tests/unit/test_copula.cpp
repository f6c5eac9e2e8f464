#include <cmath>
#include <random>

#include <doctest.h>

#include "nami/copula.hpp"

using namespace nami;

namespace {

CopulaParams two_dim(double lambda, double gamma) {
  CopulaParams p = CopulaParams::independent(2, 2);
  p.lambda[0] = lambda;
  p.gamma[0][0] = gamma;
  return p;
}

CopulaParams random_params(int dim, int arms, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  CopulaParams p = CopulaParams::independent(dim, arms);
  for (auto& l : p.lambda) l = n01(rng);
  for (auto& g : p.gamma)
    for (auto& x : g) x = n01(rng);
  return p;
}

// Oracle: Sigma = (Lambda' Lambda)^-1 scaled to unit diagonal.
Eigen::MatrixXd sigma_oracle(const Eigen::MatrixXd& lambda) {
  const Eigen::MatrixXd prec = lambda.transpose() * lambda;
  const Eigen::MatrixXd cov = prec.inverse();
  const Eigen::VectorXd d = cov.diagonal().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * cov * d.asDiagonal();
}

}  // namespace

TEST_CASE("build_lambda places entries and shifts only the last row") {
  const Eigen::MatrixXd l0 = build_lambda(two_dim(0.25, 0.0), 0);
  CHECK(l0.isApprox((Eigen::Matrix2d() << 1, 0, 0.25, 1).finished()));
  const Eigen::MatrixXd l1 = build_lambda(two_dim(0.25, 0.25), 1);
  CHECK(l1.isApprox((Eigen::Matrix2d() << 1, 0, 0.5, 1).finished()));

  CopulaParams p = CopulaParams::independent(3, 2);
  p.lambda << 0.25, 0.25, 0.25;
  p.gamma[0] << 0.5, 0.0;
  const Eigen::MatrixXd l3 = build_lambda(p, 1);
  CHECK(l3(2, 0) == 0.75);
  CHECK(l3(2, 1) == 0.25);
  CHECK(l3(1, 0) == 0.25);
  CHECK(CopulaParams::lambda_index(2, 1) == 2);
}

TEST_CASE("standardize and correlation for two variables") {
  const OmegaFactor id = omega_for_arm(two_dim(0.0, 0.0), 0);
  CHECK(id.omega.isIdentity(0.0));
  CHECK(correlation(id).isIdentity(0.0));

  const OmegaFactor f = omega_for_arm(two_dim(0.25, 0.0), 0);
  CHECK(f.omega(0, 0) == 1.0);
  CHECK(f.omega(0, 1) == 0.0);
  CHECK(f.omega(1, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(f.omega(1, 1) == doctest::Approx(std::sqrt(1.0625)).epsilon(1e-15));
  CHECK(f.omega(1, 1) == doctest::Approx(1.03078).epsilon(1e-5));
  const Eigen::MatrixXd s = correlation(f);
  CHECK(s(0, 1) == doctest::Approx(-0.2425).epsilon(1e-3));
  CHECK(s(1, 0) == doctest::Approx(-0.25 / std::sqrt(1.0625)).epsilon(1e-14));

  const Eigen::MatrixXd s1 = correlation(omega_for_arm(two_dim(0.25, 0.25), 1));
  CHECK(s1(0, 1) == doctest::Approx(-0.44721).epsilon(1e-5));
}

TEST_CASE("two variable closed form on random draws") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01(0.0, 1.5);
  for (int i = 0; i < 100; ++i) {
    const double lambda = n01(rng), gamma = n01(rng);
    const CopulaParams p = two_dim(lambda, gamma);
    for (int arm = 0; arm < 2; ++arm) {
      const double l = lambda + arm * gamma;
      const Eigen::MatrixXd s = correlation(omega_for_arm(p, arm));
      CHECK(std::abs(s(1, 0) + l / std::sqrt(1.0 + l * l)) <= 1e-12);
    }
  }
}

TEST_CASE("correlation has unit diagonal, is positive definite and matches the oracle") {
  std::mt19937_64 rng(4);
  for (int dim = 2; dim <= 6; ++dim) {
    for (int rep = 0; rep < 100; ++rep) {
      const CopulaParams p = random_params(dim, 3, rng);
      for (int arm = 0; arm < 3; ++arm) {
        const Eigen::MatrixXd lambda = build_lambda(p, arm);
        const OmegaFactor f = standardize(lambda);
        const Eigen::MatrixXd s = correlation(f);
        CHECK((s.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12);
        CHECK((s - sigma_oracle(lambda)).cwiseAbs().maxCoeff() <= 1e-9);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
        // Whitening: Omega Sigma Omega' = I.
        CHECK((f.omega * s * f.omega.transpose() - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff() <= 1e-9);
      }
      const OmegaFactor f0 = omega_for_arm(p, 0);
      for (int arm = 1; arm < 3; ++arm) {
        const OmegaFactor fa = omega_for_arm(p, arm);
        CHECK(fa.omega.topRows(dim - 1) == f0.omega.topRows(dim - 1));
      }
    }
  }
}

TEST_CASE("omega_pullback matches finite differences") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  for (int dim = 2; dim <= 5; ++dim) {
    const CopulaParams p = random_params(dim, 2, rng);
    const Eigen::MatrixXd lambda = build_lambda(p, 1);
    Eigen::MatrixXd weights(dim, dim);
    for (auto& w : weights.reshaped()) w = n01(rng);
    weights = weights.triangularView<Eigen::Lower>();
    auto objective = [&](const Eigen::MatrixXd& l) { return (standardize(l).omega.cwiseProduct(weights)).sum(); };
    const Eigen::MatrixXd grad = omega_pullback(lambda, standardize(lambda), weights);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        if (j >= i) {
          CHECK(grad(i, j) == 0.0);
          continue;
        }
        Eigen::MatrixXd hi = lambda, lo = lambda;
        hi(i, j) += 1e-6;
        lo(i, j) -= 1e-6;
        CHECK(grad(i, j) == doctest::Approx((objective(hi) - objective(lo)) / 2e-6).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("strengths and rankings") {
  CopulaParams p = CopulaParams::independent(3, 2);
  p.lambda << 0.1, 0.6, -0.3;
  const Strengths none = strengths(omega_for_arm(p, 0), {omega_for_arm(p, 1)});
  CHECK(none.predictive[0].isZero(0.0));
  CHECK(none.prognostic_rank == std::vector<int>{0, 1});

  const CopulaParams q = two_dim(0.25, 0.25);
  const OmegaFactor f0 = omega_for_arm(q, 0), f1 = omega_for_arm(q, 1);
  const Strengths s = strengths(f0, {f1});
  CHECK(s.prognostic[0] == doctest::Approx(0.25).epsilon(1e-15));
  const double c0 = std::sqrt(1.0 + 0.25 * 0.25), c1 = std::sqrt(1.0 + 0.5 * 0.5);
  CHECK(c0 == doctest::Approx(f0.scale[1]).epsilon(1e-15));
  CHECK(c1 == doctest::Approx(f1.scale[1]).epsilon(1e-15));
  // Last-row entries omega(1,0) = Lambda(1,0) * s_0, and s_0 = 1 in both arms.
  CHECK(s.predictive[0][0] == doctest::Approx(std::abs(f1.omega(1, 0) - f0.omega(1, 0))).epsilon(1e-15));
  CHECK(s.predictive[0][0] == doctest::Approx(0.25).epsilon(1e-14));

  CHECK(rank_descending((Eigen::VectorXd(4) << 0.2, 0.5, 0.2, 0.9).finished()) == std::vector<int>{3, 1, 0, 2});
}

TEST_CASE("conditional summary") {
  const ConditionalSummary ind = conditional_summary(omega_for_arm(two_dim(0.0, 0.0), 0));
  CHECK(ind.betas[0] == 0.0);
  CHECK(ind.sigma == 1.0);
  CHECK(ind.r_squared == 0.0);

  const ConditionalSummary c = conditional_summary(omega_for_arm(two_dim(0.25, 0.0), 0));
  CHECK(c.betas[0] == doctest::Approx(-0.24254).epsilon(1e-5));
  CHECK(c.r_squared == doctest::Approx(0.05882).epsilon(1e-4));
  const double rho = -0.25 / std::sqrt(1.0625);
  CHECK(c.r_squared == doctest::Approx(rho * rho).epsilon(1e-14));

  const CopulaParams t = two_dim(0.25, 0.5);
  const Eigen::MatrixXd s1 = correlation(omega_for_arm(t, 1));
  CHECK(s1(1, 0) == doctest::Approx(-0.6).epsilon(1e-14));
  CHECK(conditional_summary(omega_for_arm(t, 1)).r_squared == doctest::Approx(0.36).epsilon(1e-14));
}

TEST_CASE("R squared equals the regression of the last latent on the others") {
  std::mt19937_64 rng(31);
  for (int dim = 3; dim <= 6; ++dim) {
    const CopulaParams p = random_params(dim, 2, rng);
    const OmegaFactor f = omega_for_arm(p, 1);
    const Eigen::MatrixXd s = correlation(f);
    const int k = dim - 1;
    const Eigen::MatrixXd sxx = s.topLeftCorner(k, k);
    const Eigen::VectorXd sxy = s.col(k).head(k);
    const Eigen::VectorXd beta = sxx.ldlt().solve(sxy);
    const ConditionalSummary c = conditional_summary(f);
    CHECK((c.betas - beta).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(c.r_squared == doctest::Approx(sxy.dot(beta)).epsilon(1e-10));
    CHECK(c.sigma * c.sigma == doctest::Approx(1.0 - sxy.dot(beta)).epsilon(1e-10));
  }
}
