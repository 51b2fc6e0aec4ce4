#ifndef EFFDIM_EXTENSION_HPP
#define EFFDIM_EXTENSION_HPP

#include "effdim/dmaps.hpp"

#include <Eigen/Core>
#include <string>
#include <vector>

namespace effdim {

/// Geometric-Harmonics interpolant: truncated eigenbasis of the Gaussian
/// affinity exp(-||di-dj||^2 / (2 eps)) on the training coordinates, one
/// shared basis for all output components.
struct GhModel {
    Eigen::MatrixXd train_coords; // N x d
    double epsilon = 1.0;         // squared-distance scale
    double delta = 1e-6;          // truncation: keep sigma_a > delta * sigma_0
    Eigen::VectorXd basis_eigvals;  // retained sigma_a, descending
    Eigen::MatrixXd basis_eigvecs;  // N x M orthonormal psi_a
    // Targets are mean-centered before projection (constants then extend
    // exactly); evaluation adds the mean back.
    Eigen::VectorXd output_mean;    // n_out
    Eigen::MatrixXd coefficients;   // M x n_out, <f - mean, psi_a> per output column

    // Derived: psi diag(1/sigma) coeffs. Evaluating through these per-point
    // weights is algebraically identical to the mode sum and O(N) per query.
    Eigen::MatrixXd point_weights; // N x n_out

    Eigen::Index n_outputs() const { return coefficients.cols(); }
    void rebuild_cache();

    /// Writes <stem>.json (metadata, dimensions) + <stem>.bin (row-major
    /// little-endian float64 matrices).
    void save(const std::string& stem) const;
    static GhModel load(const std::string& stem);
};

struct GhOptions {
    double epsilon = 0.0; // 0: median of nonzero pairwise squared distances
    double delta = 1e-6;
    int max_modes = 1024;
};

GhModel gh_fit(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& values,
               const GhOptions& opts = {});

Eigen::VectorXd gh_eval(const GhModel& m, const Eigen::VectorXd& coords);
Eigen::MatrixXd gh_eval_batch(const GhModel& m, const Eigen::MatrixXd& coords);

/// Same value through the explicit spectral route
/// sum_a <f,psi_a> sigma_a^-1 sum_i A(x, x_i) psi_a(i); kept as an
/// independently-checkable second path.
Eigen::VectorXd gh_eval_modes(const GhModel& m, const Eigen::VectorXd& coords);

/// Exact derivative of gh_eval: rows are outputs, columns coordinate
/// directions; each kernel term contributes -(x - x_i)/eps * A(x, x_i).
Eigen::MatrixXd gh_gradient(const GhModel& m, const Eigen::VectorXd& coords);

/// Training-set reconstruction residual per output (diagnostic).
Eigen::VectorXd gh_training_residual(const GhModel& m, const Eigen::MatrixXd& values);

/// Restriction of a new point into an existing embedding: the kernel row
/// against the training data gets the training normalizations applied, then
/// phi_b(x) = (1/lambda_b) sum_i W(x, x_i) phi_b(i). Coordinates whose
/// |lambda| < 1e-12 are returned as zero (excluded). Pass the block(s) the
/// embedding's kernel variant requires.
Eigen::VectorXd nystrom_extend(const Embedding& emb, const Eigen::VectorXd* new_input,
                               const Eigen::VectorXd* new_output);
Eigen::MatrixXd nystrom_extend_batch(const Embedding& emb, const Eigen::MatrixXd* new_inputs,
                                     const Eigen::MatrixXd* new_outputs);

/// Double DMaps: a full kernel eigenbasis on the selected non-harmonic
/// coordinates (no harmonic pruning; the point is a complete function basis on
/// the reduced manifold), used to regress arbitrary targets.
struct DoubleDmapsModel {
    std::vector<int> source_columns; // embedding columns the GH coords came from
    GhModel inner;

    void save(const std::string& stem) const;
    static DoubleDmapsModel load(const std::string& stem);
};

DoubleDmapsModel double_dmaps_fit(const Embedding& emb, const Eigen::MatrixXd& targets,
                                  const GhOptions& opts = {});

/// Evaluate at a point given in the embedding's selected coordinates.
Eigen::VectorXd double_dmaps_eval(const DoubleDmapsModel& m, const Eigen::VectorXd& phi);

} // namespace effdim

#endif
