#include "nami/copula.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nami/error.hpp"

namespace nami {

CopulaParams CopulaParams::independent(int dim, int arms) {
  if (dim < 1 || arms < 1) throw InputError("copula needs at least one variable and one arm");
  CopulaParams p;
  p.dim = dim;
  p.lambda = Eigen::VectorXd::Zero(dim * (dim - 1) / 2);
  p.gamma.assign(static_cast<std::size_t>(arms - 1), Eigen::VectorXd::Zero(dim - 1));
  return p;
}

Eigen::MatrixXd build_lambda(const CopulaParams& params, int arm) {
  const int j = params.dim;
  if (params.lambda.size() != j * (j - 1) / 2) throw InputError("lambda has the wrong length");
  if (arm < 0 || arm >= params.arms()) throw InputError("treatment arm out of range");
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(j, j);
  for (int r = 1; r < j; ++r)
    for (int c = 0; c < r; ++c) l(r, c) = params.lambda_at(r, c);
  if (arm > 0) {
    const Eigen::VectorXd& g = params.gamma[arm - 1];
    if (g.size() != j - 1) throw InputError("gamma has the wrong length");
    l.row(j - 1).head(j - 1) += g.transpose();
  }
  return l;
}

namespace {

Eigen::MatrixXd lower_inverse(const Eigen::MatrixXd& l) {
  return l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(l.rows(), l.cols()));
}

}  // namespace

OmegaFactor standardize(const Eigen::MatrixXd& lambda) {
  const Eigen::MatrixXd inv = lower_inverse(lambda);
  OmegaFactor f;
  f.scale = inv.rowwise().squaredNorm().cwiseSqrt();
  f.omega = lambda.triangularView<Eigen::Lower>().toDenseMatrix() * f.scale.asDiagonal();
  return f;
}

OmegaFactor omega_for_arm(const CopulaParams& params, int arm) {
  return standardize(build_lambda(params, arm));
}

Eigen::MatrixXd correlation(const OmegaFactor& factor) {
  const Eigen::MatrixXd inv = lower_inverse(factor.omega);
  Eigen::MatrixXd s = inv * inv.transpose();
  return 0.5 * (s + s.transpose());
}

Eigen::MatrixXd omega_pullback(const Eigen::MatrixXd& lambda, const OmegaFactor& factor,
                               const Eigen::MatrixXd& grad_omega) {
  const Eigen::Index j = lambda.rows();
  const Eigen::MatrixXd g = grad_omega.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd m = lower_inverse(lambda);
  const Eigen::MatrixXd p = m * m.transpose();
  // d s_k / d L_ab = -M_ka P_kb / s_k with M = L^-1, P = M M'.
  Eigen::VectorXd c(j);
  for (Eigen::Index k = 0; k < j; ++k) c[k] = g.col(k).dot(lambda.col(k)) / factor.scale[k];
  Eigen::MatrixXd out = g * factor.scale.asDiagonal();
  out -= m.transpose() * c.asDiagonal() * p;
  return out.triangularView<Eigen::StrictlyLower>();
}

std::vector<int> rank_descending(const Eigen::VectorXd& values) {
  std::vector<int> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return values[a] > values[b]; });
  return idx;
}

Strengths strengths(const OmegaFactor& control, const std::vector<OmegaFactor>& treated) {
  const int j = control.dim();
  Strengths s;
  const Eigen::VectorXd base = control.omega.row(j - 1).head(j - 1).transpose();
  s.prognostic = base.cwiseAbs();
  s.prognostic_rank = rank_descending(s.prognostic);
  for (const auto& t : treated) {
    if (t.dim() != j) throw InputError("Omega factors differ in dimension");
    const Eigen::VectorXd row = t.omega.row(j - 1).head(j - 1).transpose();
    s.predictive.push_back((row - base).cwiseAbs());
    s.predictive_rank.push_back(rank_descending(s.predictive.back()));
  }
  return s;
}

ConditionalSummary conditional_summary(const OmegaFactor& factor) {
  const int j = factor.dim();
  const double wjj = factor.omega(j - 1, j - 1);
  ConditionalSummary out;
  out.betas = -factor.omega.row(j - 1).head(j - 1).transpose() / wjj;
  out.sigma = 1.0 / wjj;
  out.r_squared = 1.0 - 1.0 / (wjj * wjj);
  return out;
}

}  // namespace nami
