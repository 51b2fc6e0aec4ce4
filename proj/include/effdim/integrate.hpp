#ifndef EFFDIM_INTEGRATE_HPP
#define EFFDIM_INTEGRATE_HPP

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace effdim {

/// dy/dt = f(t, y); writes the derivative into `dydt` (same length as y).
using OdeRhs = std::function<void(double t, const double* y, double* dydt)>;

enum class OdeMethod {
    rk45,         // explicit Dormand-Prince 5(4); default
    stiff_extrap, // linearly implicit Euler with polynomial extrapolation
};

struct IntegratorOptions {
    OdeMethod method = OdeMethod::rk45;
    double rtol = 1e-8;
    double atol = 1e-10;
    // Stiffness escalation: explicit stepping gives up after this many steps
    // instead of silently burning time.
    long max_steps = 20'000'000;
    double initial_step = 0.0; // 0 = choose automatically
};

struct OdeSolution {
    Eigen::VectorXd times;  // the requested grid
    Eigen::MatrixXd states; // n_times x n_states, exact samples at `times`
};

/// Integrates from times[0] (grid must be strictly increasing) and samples the
/// state exactly at every grid time by clipping steps to grid points.
/// Throws Error(integration_failure) carrying the last good time on failure.
OdeSolution solve_ode(const OdeRhs& rhs, const Eigen::VectorXd& initial_state,
                      const Eigen::VectorXd& time_grid, const IntegratorOptions& opts = {});

} // namespace effdim

#endif
