#include "effdim/dmaps.hpp"

#include "effdim/csv.hpp"
#include "effdim/eigs.hpp"
#include "effdim/errors.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>

namespace effdim {

namespace {

Eigen::MatrixXd strided_subsample(const Eigen::MatrixXd& x, Eigen::Index cap) {
    if (x.rows() <= cap) return x;
    Eigen::MatrixXd s(cap, x.cols());
    for (Eigen::Index i = 0; i < cap; ++i) s.row(i) = x.row(i * x.rows() / cap);
    return s;
}

// exponent += coef * squared pairwise distances of rows of x
void add_sq_dist_exponent(Eigen::MatrixXd& e, const Eigen::MatrixXd& x, double coef, bool first) {
    Eigen::VectorXd sq = x.rowwise().squaredNorm();
    if (first)
        e.noalias() = (-2.0 * coef) * (x * x.transpose());
    else
        e.noalias() += (-2.0 * coef) * (x * x.transpose());
    e.colwise() += coef * sq;
    e.rowwise() += coef * sq.transpose();
}

Eigen::MatrixXd normalize_block(const Eigen::MatrixXd& x, Eigen::VectorXd& mean,
                                Eigen::VectorXd& std, double& block_scale) {
    mean = x.colwise().mean();
    Eigen::MatrixXd c = x.rowwise() - mean.transpose();
    std = (c.array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < std.size(); ++j)
        if (std[j] < 1e-300) std[j] = 1.0;
    c.array().rowwise() /= std.transpose().array();
    double med = epsilon_heuristic(c);
    block_scale = std::sqrt(med);
    c /= block_scale;
    return c;
}

Eigen::VectorXd apply_block_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& std, double block_scale) {
    return ((v - mean).array() / std.array()).matrix() / block_scale;
}

} // namespace

double epsilon_heuristic(const Eigen::MatrixXd& points) {
    require(points.rows() >= 2, ErrorCode::invalid_argument,
            "epsilon heuristic needs at least two points");
    Eigen::MatrixXd x = strided_subsample(points, 4000);
    std::vector<double> d2;
    d2.reserve(static_cast<size_t>(x.rows()) * (x.rows() - 1) / 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
            double d = (x.row(i) - x.row(j)).squaredNorm();
            require(std::isfinite(d), ErrorCode::numeric_failure, "non-finite pairwise distance");
            if (d > 0.0) d2.push_back(d);
        }
    require(!d2.empty(), ErrorCode::invalid_argument,
            "all points identical; kernel scale undefined");
    size_t mid = d2.size() / 2;
    std::nth_element(d2.begin(), d2.begin() + mid, d2.end());
    return d2[mid];
}

Eigen::MatrixXd epsilon_sweep(const Eigen::MatrixXd& points, int n_points) {
    double med = epsilon_heuristic(points);
    Eigen::MatrixXd x = strided_subsample(points, 2000);
    Eigen::MatrixXd e(x.rows(), x.rows());
    add_sq_dist_exponent(e, x, 1.0, true); // squared distances
    Eigen::MatrixXd sweep(n_points, 2);
    for (int i = 0; i < n_points; ++i) {
        double lg = -3.0 + 6.0 * i / (n_points - 1);
        double eps = med * std::pow(10.0, lg);
        sweep(i, 0) = eps;
        sweep(i, 1) = (-e / (2.0 * eps)).array().exp().sum();
    }
    return sweep;
}

KernelContext resolve_kernel(const Eigen::MatrixXd* inputs, const Eigen::MatrixXd* outputs,
                             const KernelSpec& spec, double alpha) {
    KernelContext ctx;
    ctx.spec = spec;
    ctx.alpha = alpha;
    switch (spec.variant) {
    case KernelVariant::plain_input:
        require(inputs != nullptr, ErrorCode::invalid_argument, "plain_input kernel needs inputs");
        ctx.train_inputs = *inputs;
        if (ctx.spec.epsilon <= 0) ctx.spec.epsilon = epsilon_heuristic(*inputs);
        break;
    case KernelVariant::plain_output:
        require(outputs != nullptr, ErrorCode::invalid_argument,
                "plain_output kernel needs outputs");
        ctx.train_outputs = *outputs;
        if (ctx.spec.epsilon <= 0) ctx.spec.epsilon = epsilon_heuristic(*outputs);
        break;
    case KernelVariant::output_informed:
        require(inputs != nullptr && outputs != nullptr, ErrorCode::invalid_argument,
                "output_informed kernel needs both inputs and outputs");
        require(inputs->rows() == outputs->rows(), ErrorCode::dimension_mismatch,
                "input/output row mismatch");
        ctx.train_inputs = *inputs;
        ctx.train_outputs = *outputs;
        normalize_block(*inputs, ctx.in_mean, ctx.in_std, ctx.in_block_scale);
        normalize_block(*outputs, ctx.out_mean, ctx.out_std, ctx.out_block_scale);
        if (ctx.spec.epsilon <= 0) ctx.spec.epsilon = 0.5;
        break;
    }
    return ctx;
}

Eigen::MatrixXd affinity(const KernelContext& ctx) {
    const double eps = ctx.spec.epsilon;
    require(eps > 0, ErrorCode::invalid_argument, "kernel epsilon must be positive");
    Eigen::MatrixXd e;
    if (ctx.spec.variant == KernelVariant::plain_input) {
        e.resize(ctx.train_inputs.rows(), ctx.train_inputs.rows());
        add_sq_dist_exponent(e, ctx.train_inputs, -1.0 / (2.0 * eps), true);
    } else if (ctx.spec.variant == KernelVariant::plain_output) {
        e.resize(ctx.train_outputs.rows(), ctx.train_outputs.rows());
        add_sq_dist_exponent(e, ctx.train_outputs, -1.0 / (2.0 * eps), true);
    } else {
        Eigen::MatrixXd xin = ctx.train_inputs.rowwise() - ctx.in_mean.transpose();
        xin.array().rowwise() /= ctx.in_std.transpose().array();
        xin /= ctx.in_block_scale;
        Eigen::MatrixXd xout = ctx.train_outputs.rowwise() - ctx.out_mean.transpose();
        xout.array().rowwise() /= ctx.out_std.transpose().array();
        xout /= ctx.out_block_scale;
        e.resize(xin.rows(), xin.rows());
        add_sq_dist_exponent(e, xin, -1.0 / (eps * eps), true);
        add_sq_dist_exponent(e, xout, -1.0 / std::pow(eps, ctx.spec.c_exponent), false);
    }
    require(e.allFinite(), ErrorCode::numeric_failure, "non-finite kernel exponent");
    e = e.array().exp();
    e.diagonal().setOnes();
    return e;
}

Eigen::VectorXd kernel_row(const KernelContext& ctx, const Eigen::VectorXd* new_input,
                           const Eigen::VectorXd* new_output) {
    const double eps = ctx.spec.epsilon;
    auto gaussian_row = [](const Eigen::MatrixXd& train, const Eigen::VectorXd& p,
                           double coef) -> Eigen::ArrayXd {
        return ((train.rowwise() - p.transpose()).rowwise().squaredNorm().array() * coef);
    };
    Eigen::ArrayXd expo;
    switch (ctx.spec.variant) {
    case KernelVariant::plain_input:
        require(new_input, ErrorCode::invalid_argument, "kernel_row: input block required");
        expo = gaussian_row(ctx.train_inputs, *new_input, -1.0 / (2.0 * eps));
        break;
    case KernelVariant::plain_output:
        require(new_output, ErrorCode::invalid_argument, "kernel_row: output block required");
        expo = gaussian_row(ctx.train_outputs, *new_output, -1.0 / (2.0 * eps));
        break;
    case KernelVariant::output_informed: {
        require(new_input && new_output, ErrorCode::invalid_argument,
                "kernel_row: both blocks required");
        Eigen::MatrixXd xin = ctx.train_inputs.rowwise() - ctx.in_mean.transpose();
        xin.array().rowwise() /= ctx.in_std.transpose().array();
        xin /= ctx.in_block_scale;
        Eigen::MatrixXd xout = ctx.train_outputs.rowwise() - ctx.out_mean.transpose();
        xout.array().rowwise() /= ctx.out_std.transpose().array();
        xout /= ctx.out_block_scale;
        Eigen::VectorXd ni = apply_block_norm(*new_input, ctx.in_mean, ctx.in_std,
                                              ctx.in_block_scale);
        Eigen::VectorXd no = apply_block_norm(*new_output, ctx.out_mean, ctx.out_std,
                                              ctx.out_block_scale);
        expo = gaussian_row(xin, ni, -1.0 / (eps * eps)) +
               gaussian_row(xout, no, -1.0 / std::pow(eps, ctx.spec.c_exponent));
        break;
    }
    }
    return expo.exp().matrix();
}

Eigen::MatrixXd Embedding::selected_coords() const {
    Eigen::MatrixXd c(eigenvectors.rows(), static_cast<Eigen::Index>(nonharmonic.size()));
    for (size_t j = 0; j < nonharmonic.size(); ++j) c.col(static_cast<Eigen::Index>(j)) = eigenvectors.col(nonharmonic[j]);
    return c;
}

Embedding dmaps_embed(Eigen::MatrixXd aff, double alpha, int k) {
    const Eigen::Index n = aff.rows();
    require(aff.cols() == n, ErrorCode::invalid_argument, "affinity must be square");
    require(k >= 1 && k + 1 <= n, ErrorCode::invalid_argument, "k out of range (need k < N)");
    require(alpha == 0.0 || alpha == 1.0, ErrorCode::invalid_argument, "alpha must be 0 or 1");
    require(aff.allFinite(), ErrorCode::numeric_failure, "affinity has non-finite entries");
    require(aff.minCoeff() >= 0.0, ErrorCode::invalid_argument, "affinity has negative entries");

    Embedding emb;
    emb.alpha = alpha;
    Eigen::VectorXd p = aff.rowwise().sum();
    emb.kernel.p_diag = p;
    if (alpha != 0.0) {
        Eigen::ArrayXd pa = p.array().pow(-alpha);
        aff.array().colwise() *= pa;
        aff.array().rowwise() *= pa.transpose();
    }
    Eigen::VectorXd d = aff.rowwise().sum();
    emb.kernel.d_diag = d;
    Eigen::ArrayXd dis = d.array().rsqrt();
    aff.array().colwise() *= dis;
    aff.array().rowwise() *= dis.transpose();

    TopEigs eig = topk_symmetric_eigs(aff, k + 1);
    emb.eigenvalues = eig.eigenvalues;
    emb.eigenvectors = eig.eigenvectors.array().colwise() * dis;
    for (Eigen::Index j = 0; j < emb.eigenvectors.cols(); ++j) {
        emb.eigenvectors.col(j) /= emb.eigenvectors.col(j).norm();
        Eigen::Index imax = 0;
        emb.eigenvectors.col(j).cwiseAbs().maxCoeff(&imax);
        if (emb.eigenvectors(imax, j) < 0) emb.eigenvectors.col(j) *= -1.0;
    }
    emb.kernel.alpha = alpha;
    return emb;
}

Embedding dmaps_fit(const Eigen::MatrixXd* inputs, const Eigen::MatrixXd* outputs,
                    const KernelSpec& spec, double alpha, int k) {
    KernelContext ctx = resolve_kernel(inputs, outputs, spec, alpha);
    Eigen::MatrixXd aff = affinity(ctx);
    Embedding emb = dmaps_embed(std::move(aff), alpha, k);
    // keep the p/d diagonals computed by the embedding
    ctx.p_diag = emb.kernel.p_diag;
    ctx.d_diag = emb.kernel.d_diag;
    emb.kernel = std::move(ctx);
    return emb;
}

std::vector<int> select_nonharmonic(Embedding& emb, const SelectOptions& opts) {
    const Eigen::Index n = emb.eigenvectors.rows();
    const Eigen::Index cols = emb.eigenvectors.cols();
    require(cols >= 3, ErrorCode::invalid_argument,
            "need at least two nontrivial eigenvectors to run the selection");
    emb.residuals = Eigen::VectorXd::Zero(cols);
    emb.residuals[1] = 1.0; // first nontrivial eigenvector is new by definition

    const Eigen::Index n_centers = std::min<Eigen::Index>(n, opts.max_centers);
    for (Eigen::Index k = 2; k < cols; ++k) {
        Eigen::MatrixXd phi = emb.eigenvectors.middleCols(1, k - 1); // predictors
        Eigen::VectorXd y = emb.eigenvectors.col(k);

        double med = std::sqrt(epsilon_heuristic(strided_subsample(phi, 1000)));
        double h = med / opts.kernel_scale_divisor;
        double h2 = h * h;

        const Eigen::Index dim = k; // intercept + (k-1) slopes
        Eigen::MatrixXd m(dim, dim);
        Eigen::VectorXd rhs(dim), beta(dim), row(dim);
        double num = 0.0, den = 0.0;
        for (Eigen::Index ci = 0; ci < n_centers; ++ci) {
            Eigen::Index c = ci * n / n_centers;
            m.setZero();
            rhs.setZero();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == c) continue; // leave-one-out
                double d2 = (phi.row(j) - phi.row(c)).squaredNorm();
                double w = std::exp(-d2 / h2);
                if (w < 1e-14) continue;
                row[0] = 1.0;
                row.tail(k - 1) = (phi.row(j) - phi.row(c)).transpose();
                m.noalias() += w * row * row.transpose();
                rhs.noalias() += (w * y[j]) * row;
            }
            m.diagonal().array() += 1e-12 * (m.trace() + 1.0);
            beta = m.ldlt().solve(rhs);
            double pred = beta[0];
            num += (y[c] - pred) * (y[c] - pred);
            den += y[c] * y[c];
        }
        emb.residuals[k] = std::sqrt(num / std::max(den, 1e-300));
    }

    emb.nonharmonic.clear();
    for (Eigen::Index k = 1; k < cols; ++k)
        if (emb.residuals[k] > opts.r_cutoff) emb.nonharmonic.push_back(static_cast<int>(k));
    return emb.nonharmonic;
}

PcaSummary pca(const Eigen::MatrixXd& data, bool center) {
    require(data.rows() >= 2, ErrorCode::invalid_argument, "pca needs at least two rows");
    Eigen::MatrixXd x = data;
    if (center) x.rowwise() -= data.colwise().mean();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    PcaSummary s;
    s.singular_values = svd.singularValues();
    s.components = svd.matrixV();
    Eigen::ArrayXd sq = s.singular_values.array().square();
    double total = sq.sum();
    require(total > 0, ErrorCode::numeric_failure, "pca: zero-variance data");
    s.explained_variance_ratio = (sq / total).matrix();
    return s;
}

// ---------------------------------------------------------------- persistence

namespace {

nlohmann::json jvec(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd jvec_load(const nlohmann::json& a) {
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

std::string variant_name(KernelVariant v) {
    switch (v) {
    case KernelVariant::plain_input: return "plain_input";
    case KernelVariant::plain_output: return "plain_output";
    case KernelVariant::output_informed: return "output_informed";
    }
    return "?";
}

KernelVariant variant_from_name(const std::string& s) {
    if (s == "plain_input") return KernelVariant::plain_input;
    if (s == "plain_output") return KernelVariant::plain_output;
    if (s == "output_informed") return KernelVariant::output_informed;
    fail(ErrorCode::config_error, "unknown kernel variant: " + s);
}

} // namespace

void Embedding::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    write_csv(dir + "/eigenvalues.csv", eigenvalues);
    write_csv(dir + "/eigenvectors.csv", eigenvectors);
    nlohmann::json sel = {{"indices", nonharmonic}, {"residuals", jvec(residuals)}};
    write_text_file(dir + "/selection.json", sel.dump(2) + "\n");

    nlohmann::json kc = {
        {"variant", variant_name(kernel.spec.variant)},
        {"epsilon", kernel.spec.epsilon},
        {"c_exponent", kernel.spec.c_exponent},
        {"alpha", kernel.alpha},
        {"in_mean", jvec(kernel.in_mean)},
        {"in_std", jvec(kernel.in_std)},
        {"out_mean", jvec(kernel.out_mean)},
        {"out_std", jvec(kernel.out_std)},
        {"in_block_scale", kernel.in_block_scale},
        {"out_block_scale", kernel.out_block_scale},
    };
    write_text_file(dir + "/kernel_context.json", kc.dump(2) + "\n");
    Eigen::MatrixXd norms(kernel.p_diag.size(), 2);
    norms.col(0) = kernel.p_diag;
    norms.col(1) = kernel.d_diag;
    write_csv(dir + "/normalizations.csv", norms, {"p_diag", "d_diag"});
    if (kernel.train_inputs.size() > 0) write_csv(dir + "/train_inputs.csv", kernel.train_inputs);
    if (kernel.train_outputs.size() > 0)
        write_csv(dir + "/train_outputs.csv", kernel.train_outputs);
}

Embedding Embedding::load(const std::string& dir) {
    Embedding e;
    e.eigenvalues = read_csv_matrix(dir + "/eigenvalues.csv").col(0);
    e.eigenvectors = read_csv_matrix(dir + "/eigenvectors.csv");
    auto sel = nlohmann::json::parse(read_text_file(dir + "/selection.json"));
    for (const auto& i : sel["indices"]) e.nonharmonic.push_back(i.get<int>());
    e.residuals = jvec_load(sel["residuals"]);
    auto kc = nlohmann::json::parse(read_text_file(dir + "/kernel_context.json"));
    e.kernel.spec.variant = variant_from_name(kc["variant"].get<std::string>());
    e.kernel.spec.epsilon = kc["epsilon"].get<double>();
    e.kernel.spec.c_exponent = kc["c_exponent"].get<double>();
    e.kernel.alpha = kc["alpha"].get<double>();
    e.alpha = e.kernel.alpha;
    e.kernel.in_mean = jvec_load(kc["in_mean"]);
    e.kernel.in_std = jvec_load(kc["in_std"]);
    e.kernel.out_mean = jvec_load(kc["out_mean"]);
    e.kernel.out_std = jvec_load(kc["out_std"]);
    e.kernel.in_block_scale = kc["in_block_scale"].get<double>();
    e.kernel.out_block_scale = kc["out_block_scale"].get<double>();
    Eigen::MatrixXd norms = read_csv_matrix(dir + "/normalizations.csv");
    e.kernel.p_diag = norms.col(0);
    e.kernel.d_diag = norms.col(1);
    if (std::filesystem::exists(dir + "/train_inputs.csv"))
        e.kernel.train_inputs = read_csv_matrix(dir + "/train_inputs.csv");
    if (std::filesystem::exists(dir + "/train_outputs.csv"))
        e.kernel.train_outputs = read_csv_matrix(dir + "/train_outputs.csv");
    return e;
}

} // namespace effdim
