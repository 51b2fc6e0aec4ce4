#include "effdim/extension.hpp"

#include "effdim/csv.hpp"
#include "effdim/eigs.hpp"
#include "effdim/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace effdim {

namespace {

Eigen::ArrayXd kernel_row_gaussian(const Eigen::MatrixXd& train, const Eigen::VectorXd& x,
                                   double epsilon) {
    return ((train.rowwise() - x.transpose()).rowwise().squaredNorm().array() /
            (-2.0 * epsilon))
        .exp();
}

} // namespace

void GhModel::rebuild_cache() {
    Eigen::VectorXd inv = basis_eigvals.cwiseInverse();
    point_weights.noalias() = basis_eigvecs * (inv.asDiagonal() * coefficients);
}

GhModel gh_fit(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& values,
               const GhOptions& opts) {
    const Eigen::Index n = coords.rows();
    require(n >= 2, ErrorCode::invalid_argument, "gh_fit needs at least two points");
    require(values.rows() == n, ErrorCode::dimension_mismatch,
            "gh_fit: coords/values row mismatch");
    require(opts.delta > 0.0 && opts.delta < 1.0, ErrorCode::invalid_argument,
            "delta must lie in (0,1)");

    GhModel m;
    m.train_coords = coords;
    m.delta = opts.delta;
    m.epsilon = opts.epsilon > 0 ? opts.epsilon : epsilon_heuristic(coords);

    Eigen::MatrixXd aff(n, n);
    {
        Eigen::VectorXd sq = coords.rowwise().squaredNorm();
        aff.noalias() = coords * coords.transpose();
        aff *= 2.0;
        aff.colwise() -= sq;
        aff.rowwise() -= sq.transpose();
        aff /= (2.0 * m.epsilon);
        aff = aff.array().exp();
        aff.diagonal().setOnes();
    }

    // grow the computed subspace until the truncation boundary is inside it
    const int cap = static_cast<int>(std::min<Eigen::Index>(n, opts.max_modes));
    int k = std::min(64, cap);
    TopEigs eig;
    for (;;) {
        TopEigsOptions eopts;
        eopts.tol = 1e-12;
        eig = topk_symmetric_eigs(aff, k, eopts);
        if (eig.eigenvalues[k - 1] <= opts.delta * eig.eigenvalues[0] || k == cap) break;
        k = std::min(cap, 2 * k);
    }
    const double sigma0 = eig.eigenvalues[0];
    int retained = 0;
    while (retained < k && eig.eigenvalues[retained] > opts.delta * sigma0) ++retained;
    require(retained > 0, ErrorCode::numeric_failure,
            "gh_fit: empty retained set; increase delta or epsilon");

    m.basis_eigvals = eig.eigenvalues.head(retained);
    m.basis_eigvecs = eig.eigenvectors.leftCols(retained);
    m.output_mean = values.colwise().mean();
    m.coefficients.noalias() =
        m.basis_eigvecs.transpose() * (values.rowwise() - m.output_mean.transpose());
    m.rebuild_cache();
    return m;
}

Eigen::VectorXd gh_eval(const GhModel& m, const Eigen::VectorXd& coords) {
    require(coords.size() == m.train_coords.cols(), ErrorCode::dimension_mismatch,
            "gh_eval: coordinate dimension mismatch");
    Eigen::ArrayXd a = kernel_row_gaussian(m.train_coords, coords, m.epsilon);
    return m.output_mean + m.point_weights.transpose() * a.matrix();
}

Eigen::MatrixXd gh_eval_batch(const GhModel& m, const Eigen::MatrixXd& coords) {
    Eigen::MatrixXd out(coords.rows(), m.n_outputs());
    for (Eigen::Index i = 0; i < coords.rows(); ++i)
        out.row(i) = gh_eval(m, coords.row(i).transpose()).transpose();
    return out;
}

Eigen::VectorXd gh_eval_modes(const GhModel& m, const Eigen::VectorXd& coords) {
    Eigen::ArrayXd a = kernel_row_gaussian(m.train_coords, coords, m.epsilon);
    Eigen::VectorXd psi_at_x =
        (m.basis_eigvecs.transpose() * a.matrix()).cwiseQuotient(m.basis_eigvals);
    return m.output_mean + m.coefficients.transpose() * psi_at_x;
}

Eigen::MatrixXd gh_gradient(const GhModel& m, const Eigen::VectorXd& coords) {
    require(coords.size() == m.train_coords.cols(), ErrorCode::dimension_mismatch,
            "gh_gradient: coordinate dimension mismatch");
    Eigen::ArrayXd a = kernel_row_gaussian(m.train_coords, coords, m.epsilon);
    // rows: outputs; cols: coordinates
    Eigen::MatrixXd w = m.point_weights.array().colwise() * a; // N x n_out
    Eigen::VectorXd s = w.colwise().sum();                     // n_out
    Eigen::MatrixXd g = w.transpose() * m.train_coords;        // n_out x d
    g.noalias() -= s * coords.transpose();
    return g / m.epsilon;
}

Eigen::VectorXd gh_training_residual(const GhModel& m, const Eigen::MatrixXd& values) {
    Eigen::MatrixXd recon = m.basis_eigvecs * m.coefficients;
    recon.rowwise() += m.output_mean.transpose();
    Eigen::VectorXd res(values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) res[j] = (recon.col(j) - values.col(j)).norm();
    return res;
}

void GhModel::save(const std::string& stem) const {
    std::filesystem::create_directories(std::filesystem::path(stem).parent_path());
    nlohmann::json j = {
        {"epsilon", epsilon},
        {"delta", delta},
        {"n_train", train_coords.rows()},
        {"dim", train_coords.cols()},
        {"modes", basis_eigvals.size()},
        {"n_outputs", coefficients.cols()},
        {"layout", "train_coords, basis_eigvals, basis_eigvecs, coefficients; row-major f64le"},
    };
    write_text_file(stem + ".json", j.dump(2) + "\n");
    std::ofstream os(stem + ".bin", std::ios::binary);
    require(os.good(), ErrorCode::io_error, "cannot open " + stem + ".bin");
    write_matrix_blob(os, train_coords);
    write_matrix_blob(os, basis_eigvals);
    write_matrix_blob(os, basis_eigvecs);
    write_matrix_blob(os, output_mean);
    write_matrix_blob(os, coefficients);
}

GhModel GhModel::load(const std::string& stem) {
    auto j = nlohmann::json::parse(read_text_file(stem + ".json"));
    GhModel m;
    m.epsilon = j["epsilon"].get<double>();
    m.delta = j["delta"].get<double>();
    Eigen::Index n = j["n_train"].get<Eigen::Index>();
    Eigen::Index d = j["dim"].get<Eigen::Index>();
    Eigen::Index modes = j["modes"].get<Eigen::Index>();
    Eigen::Index n_out = j["n_outputs"].get<Eigen::Index>();
    std::ifstream is(stem + ".bin", std::ios::binary);
    require(is.good(), ErrorCode::io_error, "cannot open " + stem + ".bin");
    m.train_coords = read_matrix_blob(is, n, d);
    m.basis_eigvals = read_matrix_blob(is, modes, 1);
    m.basis_eigvecs = read_matrix_blob(is, n, modes);
    m.output_mean = read_matrix_blob(is, n_out, 1);
    m.coefficients = read_matrix_blob(is, modes, n_out);
    m.rebuild_cache();
    return m;
}

Eigen::VectorXd nystrom_extend(const Embedding& emb, const Eigen::VectorXd* new_input,
                               const Eigen::VectorXd* new_output) {
    const Eigen::Index n = emb.eigenvectors.rows();
    require(emb.kernel.p_diag.size() == n && emb.kernel.d_diag.size() == n,
            ErrorCode::invalid_argument, "embedding is missing its kernel normalizations");
    Eigen::VectorXd a = kernel_row(emb.kernel, new_input, new_output);
    const double alpha = emb.kernel.alpha;
    Eigen::ArrayXd at = a.array();
    if (alpha != 0.0) {
        double p_new = std::pow(a.sum(), alpha);
        at /= (emb.kernel.p_diag.array().pow(alpha) * p_new);
    }
    double d_new = at.sum();
    require(d_new > 0.0 && std::isfinite(d_new), ErrorCode::numeric_failure,
            "nystrom: new point is disconnected from the training data");
    Eigen::VectorXd w = (at / d_new).matrix();

    Eigen::VectorXd phi(emb.eigenvalues.size());
    static bool warned = false;
    for (Eigen::Index b = 0; b < emb.eigenvalues.size(); ++b) {
        double lam = emb.eigenvalues[b];
        if (std::abs(lam) < 1e-12) {
            if (!warned) {
                std::cerr << "nystrom: eigenvalue " << b
                          << " below 1e-12; coordinate excluded\n";
                warned = true;
            }
            phi[b] = 0.0;
            continue;
        }
        phi[b] = w.dot(emb.eigenvectors.col(b)) / lam;
    }
    return phi;
}

Eigen::MatrixXd nystrom_extend_batch(const Embedding& emb, const Eigen::MatrixXd* new_inputs,
                                     const Eigen::MatrixXd* new_outputs) {
    const Eigen::Index rows = new_inputs ? new_inputs->rows() : new_outputs->rows();
    require(!new_inputs || !new_outputs || new_inputs->rows() == new_outputs->rows(),
            ErrorCode::dimension_mismatch, "nystrom batch: row mismatch");
    Eigen::MatrixXd out(rows, emb.eigenvalues.size());
    for (Eigen::Index i = 0; i < rows; ++i) {
        Eigen::VectorXd in, ou;
        if (new_inputs) in = new_inputs->row(i).transpose();
        if (new_outputs) ou = new_outputs->row(i).transpose();
        out.row(i) = nystrom_extend(emb, new_inputs ? &in : nullptr,
                                    new_outputs ? &ou : nullptr)
                         .transpose();
    }
    return out;
}

DoubleDmapsModel double_dmaps_fit(const Embedding& emb, const Eigen::MatrixXd& targets,
                                  const GhOptions& opts) {
    require(!emb.nonharmonic.empty(), ErrorCode::invalid_argument,
            "double dmaps: embedding has no selected non-harmonic coordinates");
    require(targets.rows() == emb.eigenvectors.rows(), ErrorCode::dimension_mismatch,
            "double dmaps: target rows must match the embedding");
    DoubleDmapsModel m;
    m.source_columns = emb.nonharmonic;
    m.inner = gh_fit(emb.selected_coords(), targets, opts);
    return m;
}

Eigen::VectorXd double_dmaps_eval(const DoubleDmapsModel& m, const Eigen::VectorXd& phi) {
    return gh_eval(m.inner, phi);
}

void DoubleDmapsModel::save(const std::string& stem) const {
    inner.save(stem);
    auto j = nlohmann::json::parse(read_text_file(stem + ".json"));
    j["source_columns"] = source_columns;
    write_text_file(stem + ".json", j.dump(2) + "\n");
}

DoubleDmapsModel DoubleDmapsModel::load(const std::string& stem) {
    DoubleDmapsModel m;
    m.inner = GhModel::load(stem);
    auto j = nlohmann::json::parse(read_text_file(stem + ".json"));
    for (const auto& c : j["source_columns"]) m.source_columns.push_back(c.get<int>());
    return m;
}

} // namespace effdim
