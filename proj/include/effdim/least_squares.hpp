#ifndef EFFDIM_LEAST_SQUARES_HPP
#define EFFDIM_LEAST_SQUARES_HPP

#include <Eigen/Core>
#include <functional>

namespace effdim {

/// Residual evaluation; returns false when the model cannot be evaluated at
/// `x` (e.g. integration failure), which the optimizer treats as a rejected
/// trial point rather than a fatal error.
using ResidualFn = std::function<bool(const Eigen::VectorXd& x, Eigen::VectorXd& residual)>;

struct LeastSquaresOptions {
    int max_iterations = 2000;
    double gradient_tol = 1e-8; // on the infinity norm of grad(sum r^2)
    double fd_step = 1e-6;      // central-difference step on the optimization variables
    double step_tol = 1e-14;
};

struct LeastSquaresResult {
    Eigen::VectorXd argmin;
    double objective = 0.0; // sum of squared residuals
    double gradient_inf_norm = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Levenberg-Marquardt on the residual vector with central-difference
/// Jacobians and diagonal (More-style) damping scaling; falls back to a
/// gradient descent step with backtracking line search when damping alone
/// stops making progress.
LeastSquaresResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& opts = {});

} // namespace effdim

#endif
