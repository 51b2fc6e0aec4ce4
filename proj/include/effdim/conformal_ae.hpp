#ifndef EFFDIM_CONFORMAL_AE_HPP
#define EFFDIM_CONFORMAL_AE_HPP

#include "effdim/mlp.hpp"
#include "effdim/models.hpp"

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace effdim {

struct CaeConfig {
    int d_eff = 1;              // meaningful latent count (from the dimension counting)
    double alpha_ortho = 33.0;  // weight of the conformality penalty
    double lr_encoder = 1e-3;
    double lr_decoder = 1e-3;
    double lr_behavior = 1e-3;
    int epochs = 20000;
    int batch = 0; // 0: full batch
    int plateau_epochs = 2000;
    double plateau_rel = 1e-4;
    double divergence_cap = 1e6;
    std::vector<int> hidden = {20, 20, 20, 20}; // five weight layers per subnet
    std::uint64_t seed = 0;
    bool train_estimator = false; // NN4, fitted post hoc, never in the alternating loop
};

/// Y-shaped conformal autoencoder. Latents nu = encoder(standardized params);
/// the first d_eff latents are the meaningful combinations, the rest the
/// redundant ones. The conformality constraint (pairwise orthogonal latent
/// input-gradients) lives in standardized input space.
struct CaeWeights {
    Mlp encoder;  // m -> m
    Mlp decoder;  // m -> m
    Mlp behavior; // d_eff -> n_obs
    std::optional<Mlp> estimator; // n_obs -> d_eff (NN4)
    Scaler in_scaler;  // parameters
    Scaler out_scaler; // behaviors
    int d_eff = 1;

    Eigen::MatrixXd encode(const Eigen::MatrixXd& params_natural) const;
    Eigen::MatrixXd decode(const Eigen::MatrixXd& latents) const; // back to natural units
    Eigen::MatrixXd predict_behavior(const Eigen::MatrixXd& latents_meaningful) const;
    Eigen::MatrixXd estimate_latents(const Eigen::MatrixXd& behaviors_natural) const; // via NN4

    void save(const std::string& stem) const; // stem.json + stem.bin
    static CaeWeights load(const std::string& stem);
};

struct CaeTrainResult {
    CaeWeights weights;
    // columns: reconstruction MSE, conformality penalty (already x alpha),
    // behavior MSE; one row per epoch
    Eigen::MatrixXd loss_history;
};

/// Alternating two-step training: step A updates (encoder, decoder) on
/// reconstruction + alpha * sum_{i<j} MSE(<d nu_i, d nu_j>, 0); step B updates
/// (encoder, behavior) on the behavior MSE with the behavior net reading only
/// the first d_eff latents. Deterministic for a fixed seed. The conformality
/// term is differentiated exactly (forward tangents through the encoder,
/// reverse accumulation through the tangent computation).
CaeTrainResult train_conformal_ae(const Eigen::MatrixXd& params, const Eigen::MatrixXd& behaviors,
                                  const CaeConfig& cfg);

/// Exact d nu / d p. With natural_units the scaler chain rule is applied,
/// otherwise the Jacobian is taken in the standardized input space the
/// conformality constraint was trained in.
Eigen::MatrixXd encoder_input_jacobian(const CaeWeights& w, const Eigen::VectorXd& p_natural,
                                       bool natural_units = true);

/// Mean squared latent-gradient inner product per pair (i, j), i < j, in the
/// order (0,1), (0,2), ..., ordered over the given points.
Eigen::VectorXd conformality_residual(const CaeWeights& w, const Eigen::MatrixXd& points_natural);

struct LevelSetTrace {
    Eigen::MatrixXd redundant_grid; // G x (m - d_eff), latent values used
    Eigen::MatrixXd decoded_params; // G x m, natural units
    std::vector<bool> valid;        // false when the decoded point is nonpositive
    Eigen::MatrixXd simulated;      // G x n_obs (rows of invalid points are zero)
    Eigen::VectorXd deviation;      // relative l2 deviation from reference_behavior
};

/// Decodes (nu_meaningful fixed, redundant latents varied over the grid),
/// re-simulates each decoded parameter vector, and reports the deviation from
/// the reference behavior.
LevelSetTrace trace_level_set(const CaeWeights& w, ModelId model,
                              const Eigen::VectorXd& initial_state, const ObservableSpec& obs,
                              const Eigen::VectorXd& nu_meaningful,
                              const Eigen::MatrixXd& redundant_grid,
                              const Eigen::VectorXd& reference_behavior,
                              const IntegratorOptions& iopts = {});

namespace cae_detail {

/// Value and exact parameter-gradient of the conformality penalty
/// alpha * sum_{i<j} MSE(<d nu_i, d nu_j>, 0) for an encoder forward cache.
/// Weight contributions accumulate into `grads`; activation-level adjoints
/// that must join the primal reverse sweep are returned in `extra_adjoints`.
/// Exposed for the finite-difference gradient checks.
double conformality_penalty_and_grads(const Mlp& encoder,
                                      const std::vector<Eigen::MatrixXd>& acts, double alpha,
                                      MlpGrads& grads,
                                      std::vector<Eigen::MatrixXd>& extra_adjoints);

} // namespace cae_detail

} // namespace effdim

#endif
