#include "effdim/integrate.hpp"

#include "effdim/errors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace effdim {

namespace {

[[noreturn]] void integration_failed(double last_good_time, const std::string& why) {
    std::ostringstream ss;
    ss << "integration failure at t=" << last_good_time << ": " << why
       << " (last good time " << last_good_time << ")";
    fail(ErrorCode::integration_failure, ss.str());
}

double error_norm(const Eigen::VectorXd& e, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                  double rtol, double atol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        double q = e[i] / sc;
        acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(e.size()));
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - bhat (5th minus embedded 4th order weights)
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

class Rk45Stepper {
  public:
    Rk45Stepper(const OdeRhs& rhs, Eigen::Index n) : rhs_(rhs) {
        for (auto* k : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_}) k->resize(n);
        ytmp_.resize(n);
        err_.resize(n);
        ynew_.resize(n);
    }

    void prime(double t, const Eigen::VectorXd& y) {
        rhs_(t, y.data(), k1_.data());
        primed_ = true;
    }

    // One trial step; on acceptance k1 is recycled (FSAL).
    bool try_step(double t, const Eigen::VectorXd& y, double h, double rtol, double atol,
                  Eigen::VectorXd& y_out, double& err_out) {
        if (!primed_) prime(t, y);
        ytmp_ = y + h * (a21 * k1_);
        rhs_(t + c2 * h, ytmp_.data(), k2_.data());
        ytmp_ = y + h * (a31 * k1_ + a32 * k2_);
        rhs_(t + c3 * h, ytmp_.data(), k3_.data());
        ytmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        rhs_(t + c4 * h, ytmp_.data(), k4_.data());
        ytmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        rhs_(t + c5 * h, ytmp_.data(), k5_.data());
        ytmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        rhs_(t + h, ytmp_.data(), k6_.data());
        ynew_ = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
        rhs_(t + h, ynew_.data(), k7_.data());
        err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
        if (!ynew_.allFinite() || !err_.allFinite()) return false;
        err_out = error_norm(err_, y, ynew_, rtol, atol);
        if (err_out <= 1.0) {
            y_out = ynew_;
            k1_.swap(k7_); // FSAL
            return true;
        }
        return false;
    }

    void invalidate() { primed_ = false; }
    double order_exponent() const { return 1.0 / 5.0; }

  private:
    const OdeRhs& rhs_;
    Eigen::VectorXd k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, err_, ynew_;
    bool primed_ = false;
};

// Linearly implicit Euler with fixed-column polynomial extrapolation
// (harmonic sequence 1,2,3,4). A single finite-difference Jacobian per macro
// step; L-stable base method, so the stage count never explodes on the stiff
// kinetic systems the way an explicit method's step count does. Result is the
// order-4 extrapolant, error estimated against the order-3 column.
class StiffExtrapStepper {
  public:
    StiffExtrapStepper(const OdeRhs& rhs, Eigen::Index n)
        : rhs_(rhs), n_(n), jac_(n, n), lu_(n), f0_(n), ytmp_(n), ftmp_(n), delta_(n) {
        for (auto& t : table_) t.resize(n);
    }

    bool try_step(double t, const Eigen::VectorXd& y, double h, double rtol, double atol,
                  Eigen::VectorXd& y_out, double& err_out) {
        numeric_jacobian(t, y);
        static constexpr int seq[4] = {1, 2, 3, 4};
        // Aitken-Neville tableau; T[j][k] has order k+1 (first-order base method).
        Eigen::VectorXd T[4][4];
        for (int j = 0; j < 4; ++j) {
            if (!substeps(t, y, h, seq[j], table_[j])) return false;
            T[j][0] = table_[j];
            for (int k = 1; k <= j; ++k) {
                double factor =
                    static_cast<double>(seq[j]) / static_cast<double>(seq[j - k]) - 1.0;
                T[j][k] = T[j][k - 1] + (T[j][k - 1] - T[j - 1][k - 1]) / factor;
            }
        }
        const Eigen::VectorXd& best = T[3][3];
        Eigen::VectorXd err = T[3][3] - T[3][2];
        if (!best.allFinite()) return false;
        err_out = error_norm(err, y, best, rtol, atol);
        if (err_out <= 1.0) {
            y_out = best;
            return true;
        }
        return false;
    }

    void invalidate() {}
    double order_exponent() const { return 1.0 / 4.0; }

  private:
    void numeric_jacobian(double t, const Eigen::VectorXd& y) {
        rhs_(t, y.data(), f0_.data());
        ytmp_ = y;
        const double sqrt_eps = 1.4901161193847656e-08;
        for (Eigen::Index j = 0; j < n_; ++j) {
            double dy = sqrt_eps * std::max(std::abs(y[j]), 1e-5);
            ytmp_[j] = y[j] + dy;
            rhs_(t, ytmp_.data(), ftmp_.data());
            jac_.col(j) = (ftmp_ - f0_) / dy;
            ytmp_[j] = y[j];
        }
    }

    bool substeps(double t, const Eigen::VectorXd& y, double h, int n_sub, Eigen::VectorXd& out) {
        double hs = h / n_sub;
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n_, n_) - hs * jac_;
        lu_.compute(m);
        out = y;
        double tc = t;
        for (int i = 0; i < n_sub; ++i) {
            rhs_(tc, out.data(), ftmp_.data());
            delta_ = lu_.solve(hs * ftmp_);
            out += delta_;
            tc += hs;
            if (!out.allFinite()) return false;
        }
        return true;
    }

    const OdeRhs& rhs_;
    Eigen::Index n_;
    Eigen::MatrixXd jac_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    Eigen::VectorXd f0_, ytmp_, ftmp_, delta_;
    Eigen::VectorXd table_[4];
};

double initial_step_guess(const OdeRhs& rhs, double t0, const Eigen::VectorXd& y0, double rtol,
                          double atol, double span) {
    Eigen::VectorXd f0(y0.size()), y1(y0.size()), f1(y0.size());
    rhs(t0, y0.data(), f0.data());
    double d0 = 0, d1 = 0;
    for (Eigen::Index i = 0; i < y0.size(); ++i) {
        double sc = atol + rtol * std::abs(y0[i]);
        d0 = std::max(d0, std::abs(y0[i]) / sc);
        d1 = std::max(d1, std::abs(f0[i]) / sc);
    }
    double h0 = (d1 > 1e-10) ? 0.01 * d0 / d1 : 1e-6 * span;
    h0 = std::min(std::max(h0, 1e-12 * span), span);
    y1 = y0 + h0 * f0;
    rhs(t0 + h0, y1.data(), f1.data());
    double d2 = 0;
    for (Eigen::Index i = 0; i < y0.size(); ++i) {
        double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        d2 = std::max(d2, std::abs(f1[i] - f0[i]) / sc);
    }
    d2 /= h0;
    double h1 = (std::max(d1, d2) > 1e-15) ? std::pow(0.01 / std::max(d1, d2), 0.2) : h0 * 100;
    return std::min({100 * h0, h1, span});
}

template <class Stepper>
OdeSolution drive(Stepper& stepper, const OdeRhs& rhs, const Eigen::VectorXd& y0,
                  const Eigen::VectorXd& grid, const IntegratorOptions& opts) {
    const Eigen::Index n = y0.size();
    OdeSolution sol;
    sol.times = grid;
    sol.states.resize(grid.size(), n);
    sol.states.row(0) = y0.transpose();

    double t = grid[0];
    Eigen::VectorXd y = y0;
    double span = grid[grid.size() - 1] - grid[0];
    double h = opts.initial_step > 0 ? opts.initial_step
                                     : initial_step_guess(rhs, t, y, opts.rtol, opts.atol, span);
    long steps = 0;
    Eigen::VectorXd ynew(n);

    for (Eigen::Index g = 1; g < grid.size(); ++g) {
        double t_target = grid[g];
        while (t < t_target) {
            if (++steps > opts.max_steps)
                integration_failed(t, "step cap exceeded (escalated stiffness?)");
            bool clipped = false;
            double h_try = h;
            if (t + h_try >= t_target) {
                h_try = t_target - t;
                clipped = true;
            }
            if (h_try < 1e-14 * std::max(std::abs(t), 1.0))
                integration_failed(t, "step size underflow");
            double err = 0.0;
            if (stepper.try_step(t, y, h_try, opts.rtol, opts.atol, ynew, err)) {
                t = clipped ? t_target : t + h_try;
                y.swap(ynew);
                double grow = (err > 1e-30) ? 0.9 * std::pow(err, -stepper.order_exponent()) : 5.0;
                double h_next = h_try * std::clamp(grow, 0.2, 5.0);
                h = clipped ? std::max(h, h_next) : h_next;
            } else {
                if (!std::isfinite(err) || err == 0.0)
                    h = 0.25 * h_try; // non-finite trial state
                else
                    h = h_try * std::clamp(0.9 * std::pow(err, -stepper.order_exponent()), 0.1, 0.7);
                stepper.invalidate();
                if (clipped) h = std::min(h, t_target - t);
            }
        }
        sol.states.row(g) = y.transpose();
    }
    return sol;
}

} // namespace

OdeSolution solve_ode(const OdeRhs& rhs, const Eigen::VectorXd& initial_state,
                      const Eigen::VectorXd& time_grid, const IntegratorOptions& opts) {
    require(time_grid.size() >= 1, ErrorCode::invalid_argument, "empty time grid");
    for (Eigen::Index i = 1; i < time_grid.size(); ++i)
        require(time_grid[i] > time_grid[i - 1], ErrorCode::invalid_argument,
                "time grid must be strictly increasing");
    require(initial_state.allFinite(), ErrorCode::invalid_argument, "non-finite initial state");

    if (opts.method == OdeMethod::rk45) {
        Rk45Stepper stepper(rhs, initial_state.size());
        return drive(stepper, rhs, initial_state, time_grid, opts);
    }
    StiffExtrapStepper stepper(rhs, initial_state.size());
    return drive(stepper, rhs, initial_state, time_grid, opts);
}

} // namespace effdim
