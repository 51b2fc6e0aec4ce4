#include "effdim/dataset.hpp"

#include "effdim/csv.hpp"
#include "effdim/errors.hpp"
#include "effdim/rng.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace effdim {

namespace {

std::string iso_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

} // namespace

Eigen::MatrixXd sample_parameters(const SamplingPlan& plan) {
    require(plan.count >= 1, ErrorCode::invalid_argument, "sampling count must be >= 1");
    require(plan.base_point.size() > 0, ErrorCode::invalid_argument, "empty base point");
    require((plan.base_point.array() > 0).all(), ErrorCode::invalid_argument,
            "base point must be strictly positive");
    if (plan.mode == SamplingMode::uniform_fraction)
        require(plan.fraction_or_decades >= 0.0 && plan.fraction_or_decades < 1.0,
                ErrorCode::invalid_argument, "fraction must lie in [0,1)");
    else
        require(plan.fraction_or_decades > 0.0, ErrorCode::invalid_argument,
                "decades must be positive");

    const Eigen::Index m = plan.base_point.size();
    Eigen::MatrixXd out(plan.count, m);
    Rng root(plan.seed, "sample_parameters");
    for (int i = 0; i < plan.count; ++i) {
        Rng row = root.substream(static_cast<std::uint64_t>(i));
        for (Eigen::Index j = 0; j < m; ++j) {
            double base = plan.base_point[j];
            if (plan.mode == SamplingMode::uniform_fraction) {
                double f = plan.fraction_or_decades;
                out(i, j) = row.uniform(base * (1.0 - f), base * (1.0 + f));
            } else {
                double d = plan.fraction_or_decades;
                out(i, j) = base * std::pow(10.0, row.uniform(-d, d));
            }
        }
    }
    return out;
}

void Dataset::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    write_csv(dir + "/inputs.csv", inputs);
    write_csv(dir + "/outputs.csv", outputs);
    write_text_file(dir + "/meta.json", meta.dump(2) + "\n");
}

Dataset Dataset::load(const std::string& dir) {
    Dataset d;
    d.inputs = read_csv_matrix(dir + "/inputs.csv");
    d.outputs = read_csv_matrix(dir + "/outputs.csv");
    d.meta = nlohmann::json::parse(read_text_file(dir + "/meta.json"));
    require(d.inputs.rows() == d.outputs.rows(), ErrorCode::io_error,
            "dataset row count mismatch in " + dir);
    return d;
}

static nlohmann::json plan_meta(const SamplingPlan& plan) {
    return {
        {"base_point", vec_to_json(plan.base_point)},
        {"mode", plan.mode == SamplingMode::uniform_fraction ? "uniform_fraction"
                                                             : "log_uniform_range"},
        {"fraction", plan.fraction_or_decades},
        {"seed", plan.seed},
        {"count", plan.count},
    };
}

static nlohmann::json obs_meta(const ObservableSpec& obs) {
    return {{"state_index", obs.state_index}, {"times", vec_to_json(obs.sample_times)}};
}

Dataset build_transient_dataset(ModelId model, const SamplingPlan& plan,
                                const Eigen::VectorXd& initial_state, const ObservableSpec& obs,
                                const TransientDatasetOptions& opts) {
    const auto& info = model_info(model);
    require(obs.state_index >= 0 && obs.state_index < info.n_states, ErrorCode::invalid_argument,
            "observable invalid for model " + info.name);
    Eigen::MatrixXd inputs = sample_parameters(plan);

    const Eigen::Index n_out = obs.sample_times.size();
    Eigen::MatrixXd outputs(inputs.rows(), n_out);
    std::vector<Eigen::Index> kept, dropped;
    kept.reserve(static_cast<size_t>(inputs.rows()));
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
        try {
            outputs.row(kept.size()) =
                simulate_observation(model, inputs.row(i).transpose(), initial_state, obs,
                                     opts.integrator)
                    .transpose();
            kept.push_back(i);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::integration_failure) throw;
            dropped.push_back(i);
        }
    }
    double failure_fraction =
        static_cast<double>(dropped.size()) / static_cast<double>(inputs.rows());
    require(failure_fraction <= opts.max_failure_fraction, ErrorCode::numeric_failure,
            "transient dataset: " + std::to_string(dropped.size()) + " of " +
                std::to_string(inputs.rows()) + " integrations failed (limit " +
                std::to_string(opts.max_failure_fraction * 100) + "%)");

    Dataset ds;
    ds.inputs.resize(static_cast<Eigen::Index>(kept.size()), inputs.cols());
    for (size_t k = 0; k < kept.size(); ++k) ds.inputs.row(static_cast<Eigen::Index>(k)) = inputs.row(kept[k]);
    ds.outputs = outputs.topRows(static_cast<Eigen::Index>(kept.size()));
    ds.meta = {
        {"kind", "transient"},
        {"model", info.name},
        {"plan", plan_meta(plan)},
        {"observable", obs_meta(obs)},
        {"initial_state", vec_to_json(initial_state)},
        {"integrator", opts.integrator.method == OdeMethod::rk45 ? "rk45" : "stiff_extrap"},
        {"dropped_rows", dropped},
        {"created_at", iso_now()},
        // flattened copies of the reproducibility keys named in the interface
        {"base_point", vec_to_json(plan.base_point)},
        {"mode",
         plan.mode == SamplingMode::uniform_fraction ? "uniform_fraction" : "log_uniform_range"},
        {"fraction", plan.fraction_or_decades},
        {"seed", plan.seed},
    };
    return ds;
}

FitResult fit_to_reference(ModelId model, const Eigen::VectorXd& reference,
                           const Eigen::VectorXd& start, const Eigen::VectorXd& initial_state,
                           const ObservableSpec& obs, const FitOptions& opts) {
    validate_params(model, start);
    require(reference.size() == obs.sample_times.size(), ErrorCode::dimension_mismatch,
            "reference length does not match observable times");

    // Optimize th = log(p); positivity is automatic.
    ResidualFn fn = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r) -> bool {
        Eigen::VectorXd p = th.array().exp();
        if (!p.allFinite()) return false;
        try {
            r = simulate_observation(model, p, initial_state, obs, opts.integrator) - reference;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::integration_failure) return false;
            throw;
        }
        return true;
    };

    auto lsq = levenberg_marquardt(fn, start.array().log(), opts.solver);
    FitResult fit;
    fit.argmin = lsq.argmin.array().exp();
    fit.objective_value = lsq.objective;
    fit.converged = lsq.converged;
    fit.iterations = lsq.iterations;
    fit.gradient_inf_norm = lsq.gradient_inf_norm;
    return fit;
}

Dataset build_optimization_dataset(ModelId model, const Eigen::VectorXd& reference, int n_starts,
                                   const SamplingPlan& start_plan,
                                   const Eigen::VectorXd& initial_state, const ObservableSpec& obs,
                                   const OptimizationDatasetOptions& opts) {
    require(n_starts >= 1, ErrorCode::invalid_argument, "n_starts must be >= 1");
    SamplingPlan plan = start_plan;
    plan.count = n_starts;
    Eigen::MatrixXd starts = sample_parameters(plan);

    std::vector<Eigen::VectorXd> minimizers;
    std::vector<Eigen::VectorXd> behaviors;
    std::vector<double> objectives;
    long iterations_total = 0;
    for (Eigen::Index i = 0; i < starts.rows(); ++i) {
        FitResult fit = fit_to_reference(model, reference, starts.row(i).transpose(),
                                         initial_state, obs, opts.fit);
        iterations_total += fit.iterations;
        if (!fit.converged) continue;
        try {
            behaviors.push_back(
                simulate_observation(model, fit.argmin, initial_state, obs, opts.fit.integrator));
        } catch (const Error&) {
            continue;
        }
        minimizers.push_back(fit.argmin);
        objectives.push_back(fit.objective_value);
    }

    double rate = static_cast<double>(minimizers.size()) / static_cast<double>(n_starts);
    require(rate >= opts.min_converged_fraction, ErrorCode::not_converged,
            "optimization dataset: only " + std::to_string(minimizers.size()) + " of " +
                std::to_string(n_starts) + " fits converged");

    Dataset ds;
    const Eigen::Index m = start_plan.base_point.size();
    ds.inputs.resize(static_cast<Eigen::Index>(minimizers.size()), m);
    ds.outputs.resize(static_cast<Eigen::Index>(minimizers.size()), reference.size());
    double worst_objective = 0.0;
    for (size_t k = 0; k < minimizers.size(); ++k) {
        ds.inputs.row(static_cast<Eigen::Index>(k)) = minimizers[k].transpose();
        ds.outputs.row(static_cast<Eigen::Index>(k)) = behaviors[k].transpose();
        worst_objective = std::max(worst_objective, objectives[k]);
    }
    ds.meta = {
        {"kind", "optimization"},
        {"model", model_info(model).name},
        {"plan", plan_meta(plan)},
        {"observable", obs_meta(obs)},
        {"initial_state", vec_to_json(initial_state)},
        {"reference", vec_to_json(reference)},
        {"n_starts", n_starts},
        {"converged", minimizers.size()},
        {"convergence_rate", rate},
        {"worst_objective", worst_objective},
        {"mean_iterations", static_cast<double>(iterations_total) / n_starts},
        {"created_at", iso_now()},
        {"base_point", vec_to_json(plan.base_point)},
        {"mode",
         plan.mode == SamplingMode::uniform_fraction ? "uniform_fraction" : "log_uniform_range"},
        {"fraction", plan.fraction_or_decades},
        {"seed", plan.seed},
    };
    return ds;
}

} // namespace effdim
