#include "effdim/jsf.hpp"

#include "effdim/csv.hpp"
#include "effdim/dmaps.hpp"
#include "effdim/eigs.hpp"
#include "effdim/errors.hpp"
#include "effdim/rng.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <numbers>

namespace effdim {

namespace {

Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::MatrixXd& set, double& eps_inout) {
    const Eigen::Index n = set.rows();
    if (eps_inout <= 0) eps_inout = epsilon_heuristic(set);
    Eigen::MatrixXd aff(n, n);
    Eigen::VectorXd sq = set.rowwise().squaredNorm();
    aff.noalias() = set * set.transpose();
    aff *= 2.0;
    aff.colwise() -= sq;
    aff.rowwise() -= sq.transpose();
    aff /= (2.0 * eps_inout);
    aff = aff.array().exp();
    aff.diagonal().setOnes();
    require(aff.allFinite(), ErrorCode::numeric_failure, "degenerate kernel");
    return aff;
}

// top d orthonormal eigenvectors of exp(-||xi-xj||^2 / (2 eps))
Eigen::MatrixXd kernel_eigenbasis(const Eigen::MatrixXd& set, int d, double& eps_inout) {
    return topk_symmetric_eigs(gaussian_kernel_matrix(set, eps_inout), d).eigenvectors;
}

} // namespace

JsfBasis compute_jsf(const Eigen::MatrixXd& set1, const Eigen::MatrixXd& set2, int n_functions,
                     const JsfOptions& opts) {
    const Eigen::Index n = set1.rows();
    require(set2.rows() == n && n >= 4, ErrorCode::invalid_argument,
            "sets must be row-aligned with at least a handful of samples");
    int d = opts.d > 0 ? opts.d : static_cast<int>(std::min<Eigen::Index>(100, n / 10));
    require(d >= 1 && d < n, ErrorCode::invalid_argument, "per-set eigencount out of range");
    require(n_functions >= 1 && n_functions <= 2 * d, ErrorCode::invalid_argument,
            "requested function count exceeds the concatenated basis");

    JsfBasis basis;
    basis.per_set_eigcount = d;
    basis.epsilon1 = opts.epsilon1;
    basis.epsilon2 = opts.epsilon2;
    Eigen::MatrixXd w(n, 2 * d);
    w.leftCols(d) = kernel_eigenbasis(set1, d, basis.epsilon1);
    w.rightCols(d) = kernel_eigenbasis(set2, d, basis.epsilon2);

    Eigen::BDCSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU);
    basis.singular_values = svd.singularValues();
    basis.functions = svd.matrixU().leftCols(n_functions);
    // deterministic signs
    for (Eigen::Index j = 0; j < basis.functions.cols(); ++j) {
        Eigen::Index imax = 0;
        basis.functions.col(j).cwiseAbs().maxCoeff(&imax);
        if (basis.functions(imax, j) < 0) basis.functions.col(j) *= -1.0;
    }
    return basis;
}

Eigen::MatrixXd remove_subspace(const Eigen::MatrixXd& full, const Eigen::MatrixXd& remove) {
    if (remove.cols() == 0 || remove.size() == 0) return full;
    require(remove.rows() == full.rows(), ErrorCode::dimension_mismatch,
            "remove_subspace: row mismatch");
    Eigen::MatrixXd c = full.transpose() * remove; // K x R
    return full - remove * c.transpose();
}

UncommonResult uncommon_directions(const Eigen::MatrixXd& set1, const Eigen::MatrixXd& set2,
                                   const JsfBasis& jsf, int n_smooth, int n_functions,
                                   const JsfOptions& opts) {
    (void)opts;
    const Eigen::Index n = set2.rows();
    require(set1.rows() == n, ErrorCode::dimension_mismatch, "sets must be row-aligned");
    require(n_smooth > 0 && n_smooth < n - 1, ErrorCode::invalid_argument,
            "n_smooth out of range");

    // Rebuild both kernel eigenbases at the scales the jsf run resolved, and
    // take the full strongly-common block of the concatenated SVD: among
    // degenerate sqrt(2) directions the factor rotates freely, so the whole
    // block is needed, not just the first few stored functions.
    const int d = jsf.per_set_eigcount;
    double eps1 = jsf.epsilon1, eps2 = jsf.epsilon2;
    Eigen::MatrixXd w(n, 2 * d);
    w.leftCols(d) = kernel_eigenbasis(set1, d, eps1);
    w.rightCols(d) = kernel_eigenbasis(set2, d, eps2);
    Eigen::BDCSVD<Eigen::MatrixXd> jsvd(w, Eigen::ComputeThinU);
    const double cut = 0.9 * std::sqrt(2.0);
    int n_common = 0;
    while (n_common < 2 * d && jsvd.singularValues()[n_common] >= cut) ++n_common;
    if (n_common == 0) n_common = 1;
    Eigen::MatrixXd u_common = jsvd.matrixU().leftCols(n_common);

    // The common manifold is low-dimensional (it is the effective-parameter
    // space), so parameterize it by a few leading nontrivial common columns;
    // stacking many harmonics saturates pairwise distances and the kernel on
    // the embedding degenerates.
    int first = first_nontrivial_column(u_common);
    if (first < 0) first = 0;
    int embed_cols = std::min<int>(3, n_common - first);
    if (embed_cols < 1) embed_cols = 1;
    Eigen::MatrixXd embed_coords = u_common.middleCols(first, embed_cols);

    // Dense span of functions of the common variables: DMaps harmonics over
    // the common coordinates plus the strongly-common block itself.
    KernelSpec spec{KernelVariant::plain_input, 0.0};
    Embedding emb = dmaps_fit(&embed_coords, nullptr, spec, 0.0, n_smooth);
    Eigen::MatrixXd common(n, n_smooth + n_common);
    common.leftCols(n_smooth) = emb.eigenvectors.leftCols(n_smooth);
    common.rightCols(n_common) = u_common;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(common);
    common = qr.householderQ() * Eigen::MatrixXd::Identity(n, common.cols());

    // Candidate smooth functions on set2 at a fine, geometry-resolving scale:
    // DMaps eigenvectors of set2 itself. The scale must stay well below the
    // median or nearly-touching sheets of the manifold get bridged and the
    // leading harmonics turn periodic instead of monotone.
    int k_fine = std::min<int>(n_functions + 15, static_cast<int>(n) - 2);
    KernelSpec fine{KernelVariant::plain_input, eps2 / 25.0};
    Embedding emb_fine = dmaps_fit(&set2, nullptr, fine, 1.0, k_fine);
    Eigen::MatrixXd basis_fine = emb_fine.eigenvectors.rightCols(k_fine); // drop trivial

    // Survival of each candidate under removal of the common span: functions
    // of the common variables are annihilated, set-specific ones pass through
    // untouched. Near-zero survival throughout means nothing is uncommon.
    Eigen::MatrixXd residual = remove_subspace(basis_fine, common);
    Eigen::VectorXd survival(k_fine);
    for (int j = 0; j < k_fine; ++j) survival[j] = residual.col(j).norm();

    UncommonResult out;
    out.singular_values = survival;
    std::sort(out.singular_values.data(), out.singular_values.data() + k_fine,
              std::greater<double>());

    std::vector<int> keep;
    for (int j = 0; j < k_fine && static_cast<int>(keep.size()) < n_functions; ++j)
        if (survival[j] > 0.5) keep.push_back(j); // smoothness order preserved
    if (keep.empty()) {
        out.functions = residual.leftCols(std::min(n_functions, k_fine));
        return out;
    }
    out.functions.resize(n, static_cast<Eigen::Index>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j)
        out.functions.col(static_cast<Eigen::Index>(j)) = basis_fine.col(keep[j]);
    return out;
}

void spiral_point(double a, double b, double c, double& z_out, Eigen::Vector2d& y_out) {
    z_out = a + b * b;
    double radius = 0.5 * c + 0.25 * z_out + 1.0 / 3.0;
    y_out[0] = radius * std::cos(2.0 * std::numbers::pi * c);
    y_out[1] = radius * std::sin(2.0 * std::numbers::pi * c);
}

SpiralData generate_spiral(int n, std::uint64_t seed) {
    require(n >= 1, ErrorCode::invalid_argument, "n must be >= 1");
    SpiralData s;
    s.set1.resize(n, 2);
    s.set2.resize(n, 2);
    s.z.resize(n);
    s.c.resize(n);
    Rng root(seed, "spiral");
    for (int i = 0; i < n; ++i) {
        Rng row = root.substream(static_cast<std::uint64_t>(i));
        double a = row.uniform(-0.5, 0.5);
        double b = row.uniform(-0.5, 0.5);
        double c = row.uniform(-0.5, 0.5);
        double z;
        Eigen::Vector2d y;
        spiral_point(a, b, c, z, y);
        s.set1.row(i) << a, b;
        s.set2.row(i) = y.transpose();
        s.z[i] = z;
        s.c[i] = c;
    }
    return s;
}

int first_nontrivial_column(const Eigen::MatrixXd& functions, double min_relative_std) {
    for (Eigen::Index j = 0; j < functions.cols(); ++j) {
        const auto col = functions.col(j);
        double mean = col.mean();
        double sd = std::sqrt((col.array() - mean).square().mean());
        // unit-norm columns of length N have typical spread ~ 1/sqrt(N)
        double typical = col.norm() / std::sqrt(static_cast<double>(col.size()));
        if (sd > min_relative_std * typical) return static_cast<int>(j);
    }
    return -1;
}

void JsfBasis::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    write_csv(dir + "/functions.csv", functions);
    nlohmann::json j = {
        {"singular_values", std::vector<double>(singular_values.data(),
                                                singular_values.data() + singular_values.size())},
        {"d", per_set_eigcount},
        {"epsilon1", epsilon1},
        {"epsilon2", epsilon2},
    };
    write_text_file(dir + "/jsf.json", j.dump(2) + "\n");
}

JsfBasis JsfBasis::load(const std::string& dir) {
    JsfBasis b;
    b.functions = read_csv_matrix(dir + "/functions.csv");
    auto j = nlohmann::json::parse(read_text_file(dir + "/jsf.json"));
    auto sv = j["singular_values"].get<std::vector<double>>();
    b.singular_values = Eigen::Map<Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
    b.per_set_eigcount = j["d"].get<int>();
    b.epsilon1 = j["epsilon1"].get<double>();
    b.epsilon2 = j["epsilon2"].get<double>();
    return b;
}

} // namespace effdim
