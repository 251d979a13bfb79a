#pragma once

#include <Eigen/Core>

#include <functional>

namespace gatesim::optim {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LmOptions {
  double lambda0 = 1e-3;      // initial damping
  double lambda_up = 10.0;    // multiplier on a rejected step
  double lambda_down = 10.0;  // divisor on an accepted step
  int max_iterations = 100;
  double step_tol = 1e-10;
};

struct LmResult {
  Eigen::VectorXd x;
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
};

/// Central-difference Jacobian of f at x.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x);

/// Damped Gauss-Newton minimisation of |f(x)|^2. Steps are accepted only if
/// they reduce the cost, so the reported cost decreases monotonically across
/// accepted iterations.
LmResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0,
                             const LmOptions& opts = {});

}  // namespace gatesim::optim
