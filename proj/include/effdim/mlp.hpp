#ifndef EFFDIM_MLP_HPP
#define EFFDIM_MLP_HPP

#include "effdim/rng.hpp"

#include <Eigen/Core>
#include <string>
#include <vector>

namespace effdim {

/// Fully connected network, tanh hidden activations, linear output layer.
/// Batches are row-major: rows are samples.
struct Mlp {
    std::vector<Eigen::MatrixXd> weights; // W_l: n_l x n_{l-1}
    std::vector<Eigen::VectorXd> biases;

    static Mlp create(const std::vector<int>& layer_dims, Rng& rng);

    int n_layers() const { return static_cast<int>(weights.size()); }
    int in_dim() const { return static_cast<int>(weights.front().cols()); }
    int out_dim() const { return static_cast<int>(weights.back().rows()); }
    std::vector<int> layer_dims() const;

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

    /// Activations per layer: a[0] = x, a[L] = output.
    std::vector<Eigen::MatrixXd> forward_cached(const Eigen::MatrixXd& x) const;

    /// Exact Jacobian of outputs with respect to one input row.
    Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& x) const;
};

struct MlpGrads {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
    void init_like(const Mlp& net);
    void zero();
};

/// Backpropagation through a cached forward pass. `d_out` is dLoss/d(a[L]).
/// `extra_activation_adjoints`, when present, holds additional dLoss/d(a[l])
/// contributions (index l in 1..L-1) that are added as the reverse sweep
/// passes layer l; the nested-differentiation path of the conformal loss
/// produces exactly such terms. Returns dLoss/d(a[0]).
Eigen::MatrixXd mlp_backward(const Mlp& net, const std::vector<Eigen::MatrixXd>& acts,
                             const Eigen::MatrixXd& d_out, MlpGrads& grads,
                             const std::vector<Eigen::MatrixXd>* extra_activation_adjoints =
                                 nullptr);

/// Adam with bias-corrected first/second moments, defaults beta = (0.9, 0.999).
struct AdamState {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    long t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void init_like(const Mlp& net);
    void step(Mlp& net, const MlpGrads& grads, double lr);
};

/// Column-wise z-score transform with stored statistics.
struct Scaler {
    Eigen::VectorXd mean, std;
    static Scaler fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd apply_row(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd invert(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd invert_row(const Eigen::VectorXd& x) const;
};

struct MlpTrainConfig {
    std::vector<int> hidden = {30, 30, 30, 30}; // five weight layers
    double lr = 1e-3;
    int epochs = 20000;
    int batch = 0; // 0: full batch
    int plateau_epochs = 2000;
    double plateau_rel = 1e-3; // stop when best loss improves less than this over the window
    std::uint64_t seed = 0;
    bool standardize = true;
};

struct MlpRegressor {
    Mlp net;
    Scaler in_scaler, out_scaler;
    bool standardized = true;
    std::vector<double> loss_history; // training MSE (standardized space) per epoch

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
    /// Jacobian in natural units (scaler chain rule applied).
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
};

/// Plain MSE regression with Adam; deterministic for a fixed config.
MlpRegressor mlp_train_regression(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                  const MlpTrainConfig& cfg = {});

} // namespace effdim

#endif
