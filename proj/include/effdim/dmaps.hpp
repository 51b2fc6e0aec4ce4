#ifndef EFFDIM_DMAPS_HPP
#define EFFDIM_DMAPS_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

namespace effdim {

enum class KernelVariant { plain_input, plain_output, output_informed };

struct KernelSpec {
    KernelVariant variant = KernelVariant::plain_input;
    // Plain variants: epsilon is the squared-distance scale of
    // exp(-d^2 / (2 eps)); 0 means "median of nonzero pairwise squared
    // distances". Output-informed variant: epsilon is the dimensionless
    // bandwidth of exp(-d_in^2/eps^2 - d_out^2/eps^c) applied to
    // block-normalized coordinates; it should stay below 1 so that outputs are
    // resolved at the finer scale.
    double epsilon = 0.0;
    double c_exponent = 4.0;
};

/// Everything needed to evaluate the training kernel at a new point with the
/// same normalizations (Nystrom restriction).
struct KernelContext {
    KernelSpec spec; // epsilon resolved (> 0)
    double alpha = 1.0;
    Eigen::MatrixXd train_inputs;  // empty unless the variant uses inputs
    Eigen::MatrixXd train_outputs; // empty unless the variant uses outputs
    // Block normalization used by the output-informed kernel: z-score per
    // column, then a single per-block distance scale.
    Eigen::VectorXd in_mean, in_std;
    Eigen::VectorXd out_mean, out_std;
    double in_block_scale = 1.0;
    double out_block_scale = 1.0;
    // Normalization diagonals of the training kernel.
    Eigen::VectorXd p_diag; // row sums of A
    Eigen::VectorXd d_diag; // row sums of P^-a A P^-a
};

/// Median of the nonzero pairwise squared distances (exact up to N = 4000,
/// deterministic strided subsample beyond).
double epsilon_heuristic(const Eigen::MatrixXd& points);

/// Diagnostic sweep for the usual log-log plot of sum_ij A_ij(eps); returns
/// rows of (eps, sum).
Eigen::MatrixXd epsilon_sweep(const Eigen::MatrixXd& points, int n_points = 24);

/// Resolves scalers and the kernel bandwidth against training data. Either
/// matrix may be null when the variant ignores it.
KernelContext resolve_kernel(const Eigen::MatrixXd* inputs, const Eigen::MatrixXd* outputs,
                             const KernelSpec& spec, double alpha = 1.0);

/// Symmetric affinity matrix of the resolved kernel on its training data.
Eigen::MatrixXd affinity(const KernelContext& ctx);

/// One kernel row between a new point and the training data (raw, before the
/// stochastic normalizations). Pass only the blocks the variant needs.
Eigen::VectorXd kernel_row(const KernelContext& ctx, const Eigen::VectorXd* new_input,
                           const Eigen::VectorXd* new_output);

struct Embedding {
    Eigen::VectorXd eigenvalues;  // descending; eigenvalues[0] == 1 (trivial)
    Eigen::MatrixXd eigenvectors; // N x (k+1); column 0 is the constant mode
    double alpha = 1.0;
    std::vector<int> nonharmonic; // column indices (>= 1), sorted
    Eigen::VectorXd residuals;    // local-linear-regression residual per column
    KernelContext kernel;

    Eigen::MatrixXd selected_coords() const; // N x |nonharmonic|

    void save(const std::string& dir) const;
    static Embedding load(const std::string& dir);
};

/// Spectral embedding of a row-stochastic operator built from `aff` with
/// density exponent alpha in {0, 1}: eigenpairs are computed on the symmetric
/// conjugate D^-1/2 (P^-a A P^-a) D^-1/2 and mapped back, so eigenvalues are
/// real and the leading eigenvector is constant. Destroys `aff` (moved in).
Embedding dmaps_embed(Eigen::MatrixXd aff, double alpha, int k);

/// affinity + dmaps_embed + kernel context bookkeeping in one call.
Embedding dmaps_fit(const Eigen::MatrixXd* inputs, const Eigen::MatrixXd* outputs,
                    const KernelSpec& spec, double alpha, int k);

struct SelectOptions {
    double r_cutoff = 0.2;
    int max_centers = 2000; // local regressions evaluated on a strided subset
    double kernel_scale_divisor = 3.0;
};

/// Parsimonious eigenvector selection: a column is kept when it cannot be
/// predicted from the previous kept-or-not columns by Gaussian-weighted local
/// linear regression (normalized residual above the cutoff). Fills
/// `embedding.nonharmonic` and `embedding.residuals` and returns the indices.
std::vector<int> select_nonharmonic(Embedding& embedding, const SelectOptions& opts = {});

struct PcaSummary {
    Eigen::VectorXd singular_values;           // descending
    Eigen::MatrixXd components;                // m x r, columns are directions
    Eigen::VectorXd explained_variance_ratio;  // sums to 1
};

PcaSummary pca(const Eigen::MatrixXd& data, bool center = true);

} // namespace effdim

#endif
