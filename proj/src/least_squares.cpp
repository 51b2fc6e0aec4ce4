#include "effdim/least_squares.hpp"

#include "effdim/errors.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace effdim {

namespace {

// Central-difference Jacobian; false if any perturbed evaluation fails.
bool numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& x, double h, Eigen::Index n_res,
                      Eigen::MatrixXd& jac) {
    Eigen::VectorXd xp = x, rp(n_res), rm(n_res);
    jac.resize(n_res, x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        xp[j] = x[j] + h;
        if (!fn(xp, rp)) return false;
        xp[j] = x[j] - h;
        if (!fn(xp, rm)) return false;
        xp[j] = x[j];
        jac.col(j) = (rp - rm) / (2.0 * h);
    }
    return jac.allFinite();
}

} // namespace

LeastSquaresResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& opts) {
    LeastSquaresResult res;
    res.argmin = x0;

    Eigen::VectorXd x = x0, r, r_try, x_try;
    if (!fn(x, r) || !r.allFinite()) {
        // cannot even evaluate the start point
        res.converged = false;
        res.objective = std::numeric_limits<double>::infinity();
        return res;
    }
    double g = r.squaredNorm();
    const Eigen::Index n_res = r.size();

    Eigen::MatrixXd jac;
    bool have_jac = numeric_jacobian(fn, x, opts.fd_step, n_res, jac);
    double lambda = 1e-3;

    auto gradient = [&]() -> Eigen::VectorXd { return 2.0 * jac.transpose() * r; };

    for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
        if (!have_jac) break;
        Eigen::VectorXd grad = gradient();
        res.gradient_inf_norm = grad.lpNorm<Eigen::Infinity>();
        if (res.gradient_inf_norm < opts.gradient_tol) {
            res.converged = true;
            break;
        }

        Eigen::MatrixXd jtj = jac.transpose() * jac;
        Eigen::VectorXd diag = jtj.diagonal();
        double dmax = diag.maxCoeff();
        for (Eigen::Index i = 0; i < diag.size(); ++i)
            diag[i] = std::max(diag[i], 1e-12 * std::max(dmax, 1.0));

        bool stepped = false;
        while (lambda <= 1e14) {
            Eigen::MatrixXd m = jtj;
            m.diagonal() += lambda * diag;
            Eigen::VectorXd delta = m.ldlt().solve(-0.5 * grad);
            if (!delta.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            if (delta.norm() < opts.step_tol) break;
            x_try = x + delta;
            if (fn(x_try, r_try) && r_try.allFinite() && r_try.squaredNorm() < g) {
                x = x_try;
                r = r_try;
                g = r.squaredNorm();
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                break;
            }
            lambda *= 4.0;
        }

        if (!stepped) {
            // damping saturated: one backtracking gradient-descent attempt
            Eigen::VectorXd dir = -grad;
            double t = 1.0 / std::max(1.0, dir.norm());
            bool improved = false;
            for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
                x_try = x + t * dir;
                if (fn(x_try, r_try) && r_try.allFinite() && r_try.squaredNorm() < g) {
                    x = x_try;
                    r = r_try;
                    g = r.squaredNorm();
                    improved = true;
                    break;
                }
            }
            if (!improved) break; // no progress possible
            lambda = std::min(lambda, 1e6);
        }
        have_jac = numeric_jacobian(fn, x, opts.fd_step, n_res, jac);
    }

    if (have_jac && !res.converged) {
        // final criterion check (the loop may have exited on the iteration cap)
        res.gradient_inf_norm = (2.0 * jac.transpose() * r).lpNorm<Eigen::Infinity>();
        res.converged = res.gradient_inf_norm < opts.gradient_tol;
    }
    res.argmin = x;
    res.objective = g;
    return res;
}

} // namespace effdim
