#include "gatesim/levmar.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace gatesim::optim {

Eigen::MatrixXd numeric_jacobian(const ResidualFn& f,
                                 const Eigen::VectorXd& x) {
  const Eigen::VectorXd r0 = f(x);
  Eigen::MatrixXd J(r0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

LmResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0,
                             const LmOptions& opts) {
  LmResult out;
  out.x = std::move(x0);
  Eigen::VectorXd r = f(out.x);
  out.cost = r.squaredNorm();

  double lambda = opts.lambda0;
  for (out.iterations = 0; out.iterations < opts.max_iterations;
       ++out.iterations) {
    const Eigen::MatrixXd J = numeric_jacobian(f, out.x);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;

    bool stepped = false;
    while (lambda < 1e12) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal().array() += lambda;
      const Eigen::VectorXd dx = A.ldlt().solve(-g);
      if (!dx.allFinite()) {
        lambda *= opts.lambda_up;
        continue;
      }
      const Eigen::VectorXd x_new = out.x + dx;
      const Eigen::VectorXd r_new = f(x_new);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < out.cost) {
        out.x = x_new;
        r = r_new;
        out.cost = cost_new;
        lambda /= opts.lambda_down;
        if (dx.norm() < opts.step_tol) {
          out.converged = true;
          return out;
        }
        stepped = true;
        break;
      }
      lambda *= opts.lambda_up;
    }
    if (!stepped) {
      // No acceptable step at any damping: we are at a (local) minimum.
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace gatesim::optim
