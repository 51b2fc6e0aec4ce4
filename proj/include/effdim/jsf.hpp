#ifndef EFFDIM_JSF_HPP
#define EFFDIM_JSF_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace effdim {

/// Jointly smooth functions over two row-aligned observation sets: per-set
/// Gaussian kernel eigenbases, concatenated and decomposed by SVD; singular
/// values near sqrt(2) mark directions common to both sets.
struct JsfBasis {
    Eigen::MatrixXd functions;       // N x M, orthonormal columns of the left factor
    Eigen::VectorXd singular_values; // full spectrum (length 2d), descending
    int per_set_eigcount = 0;        // d
    double epsilon1 = 0.0, epsilon2 = 0.0; // per-set squared-distance scales

    void save(const std::string& dir) const; // functions.csv + jsf.json sidecar
    static JsfBasis load(const std::string& dir);
};

struct JsfOptions {
    int d = 0;             // per-set eigenvector count; 0: min(100, N/10)
    double epsilon1 = 0.0; // 0: median heuristic per set
    double epsilon2 = 0.0;
};

JsfBasis compute_jsf(const Eigen::MatrixXd& set1, const Eigen::MatrixXd& set2, int n_functions,
                     const JsfOptions& opts = {});

/// Subspace removal, transcribed: c = full^T remove; r_i = remove c_i^T;
/// out_i = full_i - r_i. Removes exactly when `remove` has orthonormal
/// columns.
Eigen::MatrixXd remove_subspace(const Eigen::MatrixXd& full, const Eigen::MatrixXd& remove);

struct UncommonResult {
    Eigen::MatrixXd functions;       // N x M
    Eigen::VectorXd singular_values; // joint-smoothness spectrum of the re-run
};

/// Uncommon directions of set2 (the set whose kernel eigenbasis is pruned):
/// a DMaps pass over the computed JSFs spans the common subspace with
/// n_smooth >> M functions, those are removed from set2's kernel eigenbasis,
/// and the JSF extraction is re-run between the residual basis and set2's raw
/// coordinates.
UncommonResult uncommon_directions(const Eigen::MatrixXd& set1, const Eigen::MatrixXd& set2,
                                   const JsfBasis& jsf, int n_smooth, int n_functions,
                                   const JsfOptions& opts = {});

/// Spiral construction used as the worked example: latent (a, b, c) uniform on
/// [-0.5, 0.5]^3, common direction z = a + b^2, and the second observation set
/// arranged on a spiral of radius c/2 + z/4 + 1/3 at angle 2 pi c.
struct SpiralData {
    Eigen::MatrixXd set1; // N x 2: (a, b)
    Eigen::MatrixXd set2; // N x 2: the spiral points
    Eigen::VectorXd z;    // common direction (ground truth)
    Eigen::VectorXd c;    // arclength parameter (ground truth)
};

SpiralData generate_spiral(int n, std::uint64_t seed);

/// The deterministic map behind the generator, exposed for direct checks.
void spiral_point(double a, double b, double c, double& z_out, Eigen::Vector2d& y_out);

/// First column with meaningful variation (skips the near-constant leading
/// function that both kernels always share).
int first_nontrivial_column(const Eigen::MatrixXd& functions, double min_relative_std = 0.1);

} // namespace effdim

#endif
