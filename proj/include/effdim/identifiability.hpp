#ifndef EFFDIM_IDENTIFIABILITY_HPP
#define EFFDIM_IDENTIFIABILITY_HPP

#include "effdim/extension.hpp"
#include "effdim/models.hpp"

#include <Eigen/Core>
#include <functional>
#include <utility>
#include <vector>

namespace effdim {

struct InvertibilityReport {
    Eigen::VectorXd determinants; // one per data point
    bool sign_consistent = false;
    double min_abs_det = 0.0;
};

using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Determinant of the (square) Jacobian at every point. With scale_normalize,
/// each partial dout_i/din_j is multiplied by std(in_j)/std(out_i) over the
/// dataset before taking determinants, which removes order-of-magnitude
/// differences between the two coordinate systems; `outputs` supplies the
/// map's values for those statistics (may be empty otherwise).
InvertibilityReport jacobian_determinants(const JacobianFn& jac, const Eigen::MatrixXd& points,
                                          bool scale_normalize,
                                          const Eigen::MatrixXd& outputs = {});

/// Convenience overload for a fitted GH map (outputs evaluated internally).
InvertibilityReport jacobian_determinants(const GhModel& m, const Eigen::MatrixXd& points,
                                          bool scale_normalize);

/// Pairs with close outputs but distant inputs: ||dout|| < out_tol and
/// ||din|| > in_tol. Exhaustive scan for N <= exact_cap; above that a spatial
/// hash on the leading output principal components prunes candidates without
/// losing any qualifying pair. An empty result is the absence of evidence
/// against global injectivity.
std::vector<std::pair<int, int>> injectivity_scan(const Eigen::MatrixXd& inputs,
                                                  const Eigen::MatrixXd& outputs, double out_tol,
                                                  double in_tol, int exact_cap = 2000);

struct NullspaceBasis {
    Eigen::MatrixXd basis;            // m x dim, orthonormal, J * v ~ 0
    Eigen::VectorXd singular_values;  // of the sensitivity matrix, descending (length m)
    Eigen::VectorXd fim_eigenvalues;  // of J^T J, = squared singular values
    Eigen::MatrixXd sensitivity;      // n x m finite-difference Jacobian
    double rank_threshold = 0.0;      // absolute threshold used
};

struct NullspaceOptions {
    double fd_step_rel = 1e-5;        // central differences, relative to each parameter
    double rank_threshold_rel = 1e-6; // sigma_i < rel * sigma_1 counts as zero
    IntegratorOptions integrator;
};

/// Finite-difference sensitivity matrix of the observation map at `point`,
/// its SVD, and the right singular vectors of the (near-)zero singular values
/// — the tangent space of the output level set.
NullspaceBasis sensitivity_nullspace(ModelId model, const Eigen::VectorXd& point,
                                     const Eigen::VectorXd& initial_state,
                                     const ObservableSpec& obs,
                                     const NullspaceOptions& opts = {});

} // namespace effdim

#endif
