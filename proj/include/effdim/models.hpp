#ifndef EFFDIM_MODELS_HPP
#define EFFDIM_MODELS_HPP

#include "effdim/integrate.hpp"

#include <Eigen/Core>
#include <string>
#include <vector>

namespace effdim {

enum class ModelId {
    msp_full,
    msp_reduced,
    toy_enzyme,
    compartmental_2,
    effectiveness_factor,
};

struct ModelInfo {
    ModelId id;
    std::string name;
    int n_states; // 0 for the algebraic model
    int n_params;
    std::vector<std::string> state_names;
    std::vector<std::string> param_names;
    Eigen::VectorXd base_point;       // the worked base parameter setting
    Eigen::VectorXd reference_ic;     // reference initial condition (empty if algebraic)
    int default_observable_state;     // -1 if none
    Eigen::VectorXd default_obs_times;
    std::string units; // bookkeeping only; values are stored as plain reals
};

const std::vector<ModelInfo>& model_catalog();
const ModelInfo& model_info(ModelId id);
ModelId model_from_name(const std::string& name);

/// Throws invalid_argument unless params has the model's length with all
/// entries strictly positive and finite.
void validate_params(ModelId id, const Eigen::VectorXd& params);

/// Time derivative of `state` under the model's kinetics. The algebraic
/// effectiveness-factor model has no dynamics and reports unsupported_model.
Eigen::VectorXd evaluate_rhs(ModelId id, const Eigen::VectorXd& state,
                             const Eigen::VectorXd& params);

using Trajectory = OdeSolution;

Trajectory integrate(ModelId id, const Eigen::VectorXd& params, const Eigen::VectorXd& initial_state,
                     const Eigen::VectorXd& time_grid, const IntegratorOptions& opts = {});

struct ObservableSpec {
    int state_index = 0;
    Eigen::VectorXd sample_times;
};

/// Selects one state at the configured times, which must be members of the
/// trajectory grid (no silent interpolation).
Eigen::VectorXd observe(const Trajectory& traj, const ObservableSpec& spec);

/// Analytical effective parameters: (kappa1, kappa2, pi) for the full MSP
/// model, k_eff for the toy enzyme, (beta1, beta2, beta3) for the
/// compartmental model, eta for the effectiveness-factor model.
/// `enzyme_total` enters the kappa/k_eff formulas; ignored otherwise.
Eigen::VectorXd analytic_effective_params(ModelId id, const Eigen::VectorXd& params,
                                          double enzyme_total);

/// Spherical-pellet effectiveness factor eta(Phi, B). Below Phi = 1e-3 the
/// coth term is evaluated by series expansion to avoid cancellation.
double effectiveness_factor(double phi, double biot);

/// Convenience wrapper: integrate + observe with a model-default-sized check.
Eigen::VectorXd simulate_observation(ModelId id, const Eigen::VectorXd& params,
                                     const Eigen::VectorXd& initial_state,
                                     const ObservableSpec& spec,
                                     const IntegratorOptions& opts = {});

} // namespace effdim

#endif
