#ifndef EFFDIM_DATASET_HPP
#define EFFDIM_DATASET_HPP

#include "effdim/least_squares.hpp"
#include "effdim/models.hpp"

#include <json.hpp>

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace effdim {

enum class SamplingMode { uniform_fraction, log_uniform_range };

struct SamplingPlan {
    Eigen::VectorXd base_point;
    SamplingMode mode = SamplingMode::uniform_fraction;
    // fraction f in [0,1) for uniform_fraction; decades > 0 for log_uniform_range
    double fraction_or_decades = 0.1;
    int count = 1;
    std::uint64_t seed = 0;
};

/// Row i is drawn from its own seeded substream, so the matrix is bit-identical
/// for a given plan regardless of evaluation order.
Eigen::MatrixXd sample_parameters(const SamplingPlan& plan);

struct Dataset {
    Eigen::MatrixXd inputs;  // N x m
    Eigen::MatrixXd outputs; // N x n
    nlohmann::json meta;

    Eigen::Index rows() const { return inputs.rows(); }
    void save(const std::string& dir) const; // inputs.csv, outputs.csv, meta.json
    static Dataset load(const std::string& dir);
};

struct TransientDatasetOptions {
    IntegratorOptions integrator;
    double max_failure_fraction = 0.01; // abort above this
};

/// The paper's transient data: outputs row i = observe(integrate(inputs row i)).
/// Failed integrations are dropped (indices logged in meta); more than
/// max_failure_fraction failures aborts with a diagnostic.
Dataset build_transient_dataset(ModelId model, const SamplingPlan& plan,
                                const Eigen::VectorXd& initial_state, const ObservableSpec& obs,
                                const TransientDatasetOptions& opts = {});

struct FitResult {
    Eigen::VectorXd argmin; // natural (positive) parameter units
    double objective_value = 0.0;
    bool converged = false;
    int iterations = 0;
    double gradient_inf_norm = 0.0;
};

struct FitOptions {
    LeastSquaresOptions solver;
    IntegratorOptions integrator;
};

/// Nonlinear least squares of the model observation against `reference`,
/// optimized in log-parameter space to preserve positivity. Convergence means
/// the infinity norm of the finite-difference gradient of g(p) = sum of squared
/// residuals dropped below solver.gradient_tol; hitting the iteration cap
/// returns converged=false rather than throwing.
FitResult fit_to_reference(ModelId model, const Eigen::VectorXd& reference,
                           const Eigen::VectorXd& start, const Eigen::VectorXd& initial_state,
                           const ObservableSpec& obs, const FitOptions& opts = {});

struct OptimizationDatasetOptions {
    FitOptions fit;
    double min_converged_fraction = 0.5; // abort below this
};

/// The paper's optimization data: converged minimizers of repeated fits to one
/// reference behavior from randomized starts. Dataset inputs are the argmin
/// vectors; outputs are their forward-simulated observations.
Dataset build_optimization_dataset(ModelId model, const Eigen::VectorXd& reference,
                                   int n_starts, const SamplingPlan& start_plan,
                                   const Eigen::VectorXd& initial_state, const ObservableSpec& obs,
                                   const OptimizationDatasetOptions& opts = {});

} // namespace effdim

#endif
