#pragma once

// Small dense optimizers used by the estimator: Levenberg-Marquardt for
// least squares, BFGS with backtracking for smooth objectives, and
// Nelder-Mead as the derivative-free fallback.

#include <Eigen/Dense>
#include <functional>

namespace alert_surface::detail {

struct StopRule {
  int max_iterations = 2000;
  double f_tol = 1e-8;  ///< absolute objective change
  double x_tol = 1e-8;  ///< parameter step
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Returns false when the residuals cannot be evaluated at x (non-finite).
/// `jac` is null when only residuals are needed.
using ResidualFn = std::function<bool(const Eigen::VectorXd& x, Eigen::VectorXd& r,
                                      Eigen::MatrixXd* jac)>;

/// Returns +inf (or NaN) outside the feasible region. `grad` may be null.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

/// Minimizes |r(x)|^2.
OptimResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd x0,
                                const StopRule& stop);

OptimResult bfgs(const ObjectiveFn& objective, Eigen::VectorXd x0, const StopRule& stop);

/// Gradient-free; `grad` is always passed as null.
OptimResult nelder_mead(const ObjectiveFn& objective, Eigen::VectorXd x0, const StopRule& stop);

}  // namespace alert_surface::detail
