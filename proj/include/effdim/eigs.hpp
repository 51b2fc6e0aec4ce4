#ifndef EFFDIM_EIGS_HPP
#define EFFDIM_EIGS_HPP

#include <Eigen/Core>
#include <cstdint>

namespace effdim {

struct TopEigsOptions {
    int oversample = 16;
    int max_iterations = 300;
    double tol = 1e-11; // on ||S v - lambda v|| relative to the leading eigenvalue
    std::uint64_t seed = 0x100;
};

struct TopEigs {
    Eigen::VectorXd eigenvalues;  // descending, length k
    Eigen::MatrixXd eigenvectors; // N x k, orthonormal columns, deterministic signs
    int iterations = 0;
    double max_residual = 0.0;
};

/// Leading k eigenpairs of a dense symmetric positive semidefinite matrix by
/// seeded randomized subspace iteration with Rayleigh-Ritz extraction. All the
/// spectra in this project (Gaussian kernels and their row-stochastic
/// conjugates) are PSD with decaying eigenvalues, which is the regime where
/// this converges quickly; a full dense solve at N = 10^4 would dominate the
/// whole pipeline's runtime.
TopEigs topk_symmetric_eigs(const Eigen::MatrixXd& s, int k, const TopEigsOptions& opts = {});

} // namespace effdim

#endif
