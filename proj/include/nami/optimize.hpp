#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nami {

/// Objective to minimize. Returns the value and, when `grad` is non-null,
/// writes the gradient. Non-finite values mark infeasible points.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct OptimOptions {
  int max_iterations = 2000;
  /// Target sup-norm of the gradient.
  double gradient_tol = 1e-7;
  /// Relative objective change treated as stalled.
  double relative_tol = 1e-9;
  /// Sup-norm accepted as converged once progress has stalled.
  double accept_gradient_tol = 1e-5;
  /// Newton steps on the numeric Hessian after BFGS stops.
  int polish_steps = 4;
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;

  double gradient_norm() const { return gradient.size() ? gradient.cwiseAbs().maxCoeff() : 0.0; }
};

/// Quasi-Newton minimization with a strong-Wolfe line search.
OptimResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const OptimOptions& options = {});

struct HessianResult {
  Eigen::MatrixXd hessian;
  /// max |H - H'| / max(1, max |H|) before symmetrization.
  double asymmetry = 0.0;
};

/// Richardson-extrapolated central differences of the analytic gradient, base
/// step rel_step * max(1, |x_i|).
/// The returned matrix is symmetrized.
HessianResult numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step = 1e-4);

/// Contiguous run of coefficients constrained to be nondecreasing.
struct MonotoneBlock {
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

struct InformationResult {
  /// Inverse observed information in the coordinates of x.
  Eigen::MatrixXd covariance;
  double asymmetry = 0.0;
  bool positive_definite = false;
  /// Coefficients merged with their predecessor because they sit on the ordering boundary.
  int tied = 0;
};

/// Covariance of the minimizer x of a per-observation objective over n observations.
/// Within each monotone block, a coefficient whose gap to its predecessor is below the
/// finite-difference step moves together with it: curvature across an active ordering
/// constraint is not defined.
InformationResult information_covariance(const Objective& f, const Eigen::VectorXd& x, double n,
                                         const std::vector<MonotoneBlock>& blocks, double rel_step = 1e-4);

/// Central-difference gradient; used as an oracle for analytic gradients.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step = 1e-6);

/// BFGS followed by Newton polishing. The final Hessian is returned through
/// `hessian` when non-null.
OptimResult minimize(const Objective& f, Eigen::VectorXd x0, const OptimOptions& options,
                     HessianResult* hessian);

}  // namespace nami
