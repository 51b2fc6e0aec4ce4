#include "effdim/models.hpp"

#include "effdim/errors.hpp"

#include <cmath>

namespace effdim {

namespace {

Eigen::VectorXd linspaced(double lo, double step, int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + step * i;
    return v;
}

std::vector<ModelInfo> build_catalog() {
    std::vector<ModelInfo> cat;

    {
        ModelInfo m;
        m.id = ModelId::msp_full;
        m.name = "msp_full";
        m.n_states = 6;
        m.n_params = 6;
        m.state_names = {"S0", "ES0", "ES1", "S1", "S2", "E"};
        m.param_names = {"kf1", "kr1", "kcat1", "kf2", "kr2", "kcat2"};
        m.base_point.resize(6);
        m.base_point << 0.71, 19.0, 6700.0, 0.97, 9200.0, 5200.0;
        m.reference_ic.resize(6);
        m.reference_ic << 5.0, 0.0, 0.0, 0.0, 0.0, 0.66;
        m.default_observable_state = 4; // S2
        m.default_obs_times = linspaced(2.0, 2.0, 10);
        m.units = "concentrations umol/L, time min";
        cat.push_back(std::move(m));
    }
    {
        ModelInfo m;
        m.id = ModelId::msp_reduced;
        m.name = "msp_reduced";
        m.n_states = 3;
        m.n_params = 3;
        m.state_names = {"S0", "S1", "S2"};
        m.param_names = {"kappa1", "kappa2", "pi"};
        // base point = analytic reduction of the full model's base point
        m.base_point.resize(3);
        m.base_point << 0.66 * 0.71 * 6700.0 / (19.0 + 6700.0),
            0.66 * 0.97 * 5200.0 / (9200.0 + 5200.0), 5200.0 / (9200.0 + 5200.0);
        m.reference_ic.resize(3);
        m.reference_ic << 5.0, 0.0, 0.0;
        m.default_observable_state = 2; // S2
        m.default_obs_times = linspaced(2.0, 2.0, 10);
        m.units = "concentrations umol/L, time min";
        cat.push_back(std::move(m));
    }
    {
        ModelInfo m;
        m.id = ModelId::toy_enzyme;
        m.name = "toy_enzyme";
        m.n_states = 4;
        m.n_params = 3;
        m.state_names = {"S0", "ES0", "S1", "E"};
        m.param_names = {"kf", "kr", "kcat"};
        m.base_point.resize(3);
        m.base_point << 0.97, 7000.0, 10000.0;
        m.reference_ic.resize(4);
        m.reference_ic << 5.0, 0.0, 0.0, 0.66;
        m.default_observable_state = 2; // S1 (product)
        m.default_obs_times = linspaced(2.0, 2.0, 5);
        m.units = "concentrations umol/L, time s";
        cat.push_back(std::move(m));
    }
    {
        ModelInfo m;
        m.id = ModelId::compartmental_2;
        m.name = "compartmental_2";
        m.n_states = 2;
        m.n_params = 4;
        m.state_names = {"x1", "x2"};
        m.param_names = {"p10", "p12", "p20", "p21"};
        m.base_point.resize(4);
        m.base_point << 1.0, 1.0, 1.0, 1.0;
        m.reference_ic.resize(2);
        m.reference_ic << 1.0, 0.0; // impulse input into compartment 1
        m.default_observable_state = 0; // x1
        m.default_obs_times = linspaced(0.5, 0.5, 10);
        m.units = "dimensionless";
        cat.push_back(std::move(m));
    }
    {
        ModelInfo m;
        m.id = ModelId::effectiveness_factor;
        m.name = "effectiveness_factor";
        m.n_states = 0;
        m.n_params = 2;
        m.param_names = {"phi", "biot"};
        m.base_point.resize(2);
        m.base_point << 1.0, 1.0;
        m.default_observable_state = -1;
        m.units = "dimensionless";
        cat.push_back(std::move(m));
    }
    return cat;
}

} // namespace

const std::vector<ModelInfo>& model_catalog() {
    static const std::vector<ModelInfo> cat = build_catalog();
    return cat;
}

const ModelInfo& model_info(ModelId id) {
    for (const auto& m : model_catalog())
        if (m.id == id) return m;
    fail(ErrorCode::unsupported_model, "unknown model id");
}

ModelId model_from_name(const std::string& name) {
    for (const auto& m : model_catalog())
        if (m.name == name) return m.id;
    fail(ErrorCode::unsupported_model, "unknown model name: " + name);
}

void validate_params(ModelId id, const Eigen::VectorXd& params) {
    const auto& info = model_info(id);
    require(params.size() == info.n_params, ErrorCode::dimension_mismatch,
            info.name + " expects " + std::to_string(info.n_params) + " parameters, got " +
                std::to_string(params.size()));
    for (Eigen::Index i = 0; i < params.size(); ++i)
        require(std::isfinite(params[i]) && params[i] > 0.0, ErrorCode::invalid_argument,
                info.name + ": parameter " + info.param_names[static_cast<size_t>(i)] +
                    " must be strictly positive");
}

namespace {

// State order: [S0, ES0, ES1, S1, S2, E]; params [kf1, kr1, kcat1, kf2, kr2, kcat2].
inline void msp_full_rhs(const double* p, const double* y, double* d) {
    const double kf1 = p[0], kr1 = p[1], kcat1 = p[2], kf2 = p[3], kr2 = p[4], kcat2 = p[5];
    const double S0 = y[0], ES0 = y[1], ES1 = y[2], S1 = y[3], E = y[5];
    const double bind1 = kf1 * E * S0;
    const double bind2 = kf2 * E * S1;
    d[0] = -bind1 + kr1 * ES0;
    d[1] = bind1 - (kr1 + kcat1) * ES0;
    d[2] = kcat1 * ES0 - (kr2 + kcat2) * ES1 + bind2;
    d[3] = -bind2 + kr2 * ES1;
    d[4] = kcat2 * ES1;
    d[5] = -bind1 + kr1 * ES0 - bind2 + kr2 * ES1 + kcat2 * ES1;
}

// State order: [S0, S1, S2]; params [kappa1, kappa2, pi].
inline void msp_reduced_rhs(const double* p, const double* y, double* d) {
    const double k1 = p[0], k2 = p[1], pi = p[2];
    d[0] = -k1 * y[0];
    d[1] = k1 * (1.0 - pi) * y[0] - k2 * y[1];
    d[2] = k1 * pi * y[0] + k2 * y[1];
}

// State order: [S0, ES0, S1, E]; params [kf, kr, kcat].
inline void toy_enzyme_rhs(const double* p, const double* y, double* d) {
    const double kf = p[0], kr = p[1], kcat = p[2];
    const double S0 = y[0], ES0 = y[1], E = y[3];
    const double bind = kf * E * S0;
    d[0] = -bind + kr * ES0;
    d[1] = bind - (kr + kcat) * ES0;
    d[2] = kcat * ES0;
    d[3] = -bind + (kr + kcat) * ES0;
}

// State order: [x1, x2]; params [p10, p12, p20, p21].
inline void compartmental_rhs(const double* p, const double* y, double* d) {
    d[0] = -(p[0] + p[1]) * y[0] + p[3] * y[1];
    d[1] = p[1] * y[0] - (p[2] + p[3]) * y[1];
}

OdeRhs make_rhs(ModelId id, const Eigen::VectorXd& params) {
    // copy params into the closure so callers may mutate/destroy theirs
    switch (id) {
    case ModelId::msp_full:
        return [p = params](double, const double* y, double* d) { msp_full_rhs(p.data(), y, d); };
    case ModelId::msp_reduced:
        return
            [p = params](double, const double* y, double* d) { msp_reduced_rhs(p.data(), y, d); };
    case ModelId::toy_enzyme:
        return
            [p = params](double, const double* y, double* d) { toy_enzyme_rhs(p.data(), y, d); };
    case ModelId::compartmental_2:
        return
            [p = params](double, const double* y, double* d) { compartmental_rhs(p.data(), y, d); };
    case ModelId::effectiveness_factor:
        fail(ErrorCode::unsupported_model,
             "effectiveness_factor is algebraic and has no dynamics");
    }
    fail(ErrorCode::unsupported_model, "unknown model id");
}

} // namespace

Eigen::VectorXd evaluate_rhs(ModelId id, const Eigen::VectorXd& state,
                             const Eigen::VectorXd& params) {
    const auto& info = model_info(id);
    require(info.n_states > 0, ErrorCode::unsupported_model,
            info.name + " is algebraic and has no right-hand side");
    validate_params(id, params);
    require(state.size() == info.n_states, ErrorCode::dimension_mismatch,
            info.name + " expects " + std::to_string(info.n_states) + " states, got " +
                std::to_string(state.size()));
    Eigen::VectorXd d(state.size());
    make_rhs(id, params)(0.0, state.data(), d.data());
    return d;
}

Trajectory integrate(ModelId id, const Eigen::VectorXd& params, const Eigen::VectorXd& initial_state,
                     const Eigen::VectorXd& time_grid, const IntegratorOptions& opts) {
    const auto& info = model_info(id);
    require(info.n_states > 0, ErrorCode::unsupported_model,
            info.name + " is algebraic; nothing to integrate");
    validate_params(id, params);
    require(initial_state.size() == info.n_states, ErrorCode::dimension_mismatch,
            "initial state length mismatch for " + info.name);
    require(time_grid.size() >= 1 && time_grid[0] == 0.0, ErrorCode::invalid_argument,
            "time grid must start at 0");
    return solve_ode(make_rhs(id, params), initial_state, time_grid, opts);
}

Eigen::VectorXd observe(const Trajectory& traj, const ObservableSpec& spec) {
    require(spec.state_index >= 0 && spec.state_index < traj.states.cols(),
            ErrorCode::dimension_mismatch, "observable state index out of range");
    Eigen::VectorXd out(spec.sample_times.size());
    Eigen::Index cursor = 0;
    for (Eigen::Index i = 0; i < spec.sample_times.size(); ++i) {
        const double t = spec.sample_times[i];
        const double tol = 1e-9 * std::max(1.0, std::abs(t));
        Eigen::Index found = -1;
        for (Eigen::Index j = cursor; j < traj.times.size(); ++j) {
            if (std::abs(traj.times[j] - t) <= tol) {
                found = j;
                break;
            }
            if (traj.times[j] > t + tol) break;
        }
        require(found >= 0, ErrorCode::invalid_argument,
                "sample time " + std::to_string(t) +
                    " is not on the trajectory grid (no interpolation)");
        out[i] = traj.states(found, spec.state_index);
        cursor = found;
    }
    return out;
}

Eigen::VectorXd analytic_effective_params(ModelId id, const Eigen::VectorXd& params,
                                          double enzyme_total) {
    validate_params(id, params);
    switch (id) {
    case ModelId::msp_full: {
        Eigen::VectorXd eff(3);
        const double kf1 = params[0], kr1 = params[1], kcat1 = params[2];
        const double kf2 = params[3], kr2 = params[4], kcat2 = params[5];
        eff[0] = enzyme_total * kf1 * kcat1 / (kr1 + kcat1);
        eff[1] = enzyme_total * kf2 * kcat2 / (kr2 + kcat2);
        eff[2] = kcat2 / (kr2 + kcat2);
        return eff;
    }
    case ModelId::toy_enzyme: {
        Eigen::VectorXd eff(1);
        eff[0] = enzyme_total * params[0] * params[2] / (params[1] + params[2]);
        return eff;
    }
    case ModelId::compartmental_2: {
        Eigen::VectorXd eff(3);
        eff[0] = params[0] + params[1];
        eff[1] = params[2] + params[3];
        eff[2] = params[1] * params[3];
        return eff;
    }
    case ModelId::effectiveness_factor: {
        Eigen::VectorXd eff(1);
        eff[0] = effectiveness_factor(params[0], params[1]);
        return eff;
    }
    case ModelId::msp_reduced:
        fail(ErrorCode::unsupported_model,
             "msp_reduced is already the reduced model; no analytic reduction");
    }
    fail(ErrorCode::unsupported_model, "unknown model id");
}

double effectiveness_factor(double phi, double biot) {
    require(std::isfinite(phi) && phi > 0.0, ErrorCode::invalid_argument, "phi must be positive");
    require(std::isfinite(biot) && biot > 0.0, ErrorCode::invalid_argument,
            "biot must be positive");
    // g = coth(3*phi) - 1/(3*phi), switching to its Taylor expansion for small
    // phi where the two terms cancel catastrophically.
    double g;
    if (phi < 1e-3) {
        const double p2 = phi * phi;
        g = phi * (1.0 + p2 * (-3.0 / 5.0 + p2 * (18.0 / 35.0 - p2 * (81.0 / 175.0))));
    } else {
        g = 1.0 / std::tanh(3.0 * phi) - 1.0 / (3.0 * phi);
    }
    return g / (phi * (1.0 + phi * g / biot));
}

Eigen::VectorXd simulate_observation(ModelId id, const Eigen::VectorXd& params,
                                     const Eigen::VectorXd& initial_state,
                                     const ObservableSpec& spec, const IntegratorOptions& opts) {
    const Eigen::Index nt = spec.sample_times.size();
    Eigen::VectorXd grid(nt + 1);
    grid[0] = 0.0;
    for (Eigen::Index i = 0; i < nt; ++i) {
        require(spec.sample_times[i] > 0.0, ErrorCode::invalid_argument,
                "observation times must be positive");
        grid[i + 1] = spec.sample_times[i];
    }
    Trajectory traj = integrate(id, params, initial_state, grid, opts);
    return observe(traj, spec);
}

} // namespace effdim
