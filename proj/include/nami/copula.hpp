#pragma once

#include <vector>

#include <Eigen/Dense>

namespace nami {

/// Dependence parameters for J variables (covariates first, outcome last).
///
/// lambda holds the strict lower triangle of Lambda row by row
/// (l21, l31, l32, ...). gamma[a] holds the last-row shifts for arm a + 1.
struct CopulaParams {
  int dim = 2;
  Eigen::VectorXd lambda;
  std::vector<Eigen::VectorXd> gamma;

  static CopulaParams independent(int dim, int arms);

  int arms() const { return static_cast<int>(gamma.size()) + 1; }
  /// Position of (row, col) in `lambda`, 0-based with row > col.
  static Eigen::Index lambda_index(int row, int col) { return row * (row - 1) / 2 + col; }
  double lambda_at(int row, int col) const { return lambda[lambda_index(row, col)]; }
};

/// Unit lower-triangular Lambda(w); only the last row depends on the arm.
Eigen::MatrixXd build_lambda(const CopulaParams& params, int arm);

/// Omega = Lambda diag(Lambda^-1 Lambda^-T)^(1/2).
struct OmegaFactor {
  Eigen::MatrixXd omega;
  /// Column scales s_j; omega(i, j) = Lambda(i, j) * s_j.
  Eigen::VectorXd scale;

  Eigen::VectorXd diag() const { return omega.diagonal(); }
  int dim() const { return static_cast<int>(omega.rows()); }
};

OmegaFactor standardize(const Eigen::MatrixXd& lambda);
OmegaFactor omega_for_arm(const CopulaParams& params, int arm);

/// Sigma = Omega^-1 Omega^-T.
Eigen::MatrixXd correlation(const OmegaFactor& factor);

/// Pulls a gradient with respect to Omega back to the strict lower triangle
/// of Lambda. `grad_omega` is read on and below the diagonal; the result is
/// strictly lower triangular.
Eigen::MatrixXd omega_pullback(const Eigen::MatrixXd& lambda, const OmegaFactor& factor,
                               const Eigen::MatrixXd& grad_omega);

struct Strengths {
  /// |omega_Jj| in the control arm, one per covariate.
  Eigen::VectorXd prognostic;
  /// |omega_Jj(arm) - omega_Jj(0)| for each non-control arm.
  std::vector<Eigen::VectorXd> predictive;
  /// Covariate indices by descending strength, ties by ascending index.
  std::vector<int> prognostic_rank;
  std::vector<std::vector<int>> predictive_rank;
};

Strengths strengths(const OmegaFactor& control, const std::vector<OmegaFactor>& treated);

/// Indices ordered by descending value; ties keep ascending index.
std::vector<int> rank_descending(const Eigen::VectorXd& values);

struct ConditionalSummary {
  /// beta_j = -omega_Jj / omega_JJ.
  Eigen::VectorXd betas;
  /// Residual scale 1 / omega_JJ of the latent outcome.
  double sigma = 1.0;
  /// 1 - omega_JJ^-2.
  double r_squared = 0.0;
};

ConditionalSummary conditional_summary(const OmegaFactor& factor);

}  // namespace nami
