#include "effdim/identifiability.hpp"

#include "effdim/errors.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace effdim {

namespace {

Eigen::VectorXd column_stds(const Eigen::MatrixXd& x) {
    Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::VectorXd std = ((x.rowwise() - mean).array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < std.size(); ++j)
        if (std[j] < 1e-300) std[j] = 1.0;
    return std;
}

} // namespace

InvertibilityReport jacobian_determinants(const JacobianFn& jac, const Eigen::MatrixXd& points,
                                          bool scale_normalize, const Eigen::MatrixXd& outputs) {
    require(points.rows() >= 1, ErrorCode::invalid_argument, "no points");
    Eigen::VectorXd in_std, out_std;
    if (scale_normalize) {
        require(outputs.rows() == points.rows(), ErrorCode::invalid_argument,
                "scale normalization needs the map outputs over the dataset");
        in_std = column_stds(points);
        out_std = column_stds(outputs);
    }

    InvertibilityReport rep;
    rep.determinants.resize(points.rows());
    int pos = 0, neg = 0;
    double min_abs = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        Eigen::MatrixXd j = jac(points.row(i).transpose());
        require(j.rows() == j.cols(), ErrorCode::dimension_mismatch,
                "jacobian must be square for a determinant audit");
        if (scale_normalize) {
            require(j.cols() == in_std.size() && j.rows() == out_std.size(),
                    ErrorCode::dimension_mismatch, "scale vectors do not match the jacobian");
            j.array().rowwise() *= in_std.transpose().array();
            j.array().colwise() /= out_std.array();
        }
        double d = j.determinant();
        rep.determinants[i] = d;
        (d >= 0 ? pos : neg)++;
        min_abs = std::min(min_abs, std::abs(d));
    }
    rep.sign_consistent = (pos == 0) || (neg == 0);
    rep.min_abs_det = min_abs;
    return rep;
}

InvertibilityReport jacobian_determinants(const GhModel& m, const Eigen::MatrixXd& points,
                                          bool scale_normalize) {
    Eigen::MatrixXd outputs;
    if (scale_normalize) outputs = gh_eval_batch(m, points);
    return jacobian_determinants(
        [&m](const Eigen::VectorXd& x) { return gh_gradient(m, x); }, points, scale_normalize,
        outputs);
}

namespace {

struct CellKey {
    std::int64_t a, b, c;
    bool operator==(const CellKey& o) const { return a == o.a && b == o.b && c == o.c; }
};

struct CellHash {
    size_t operator()(const CellKey& k) const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (std::uint64_t v : {static_cast<std::uint64_t>(k.a), static_cast<std::uint64_t>(k.b),
                                static_cast<std::uint64_t>(k.c)}) {
            h ^= v;
            h *= 0x100000001b3ull;
        }
        return h;
    }
};

} // namespace

std::vector<std::pair<int, int>> injectivity_scan(const Eigen::MatrixXd& inputs,
                                                  const Eigen::MatrixXd& outputs, double out_tol,
                                                  double in_tol, int exact_cap) {
    require(inputs.rows() == outputs.rows(), ErrorCode::dimension_mismatch,
            "injectivity scan: row mismatch");
    require(out_tol > 0 && in_tol > 0, ErrorCode::invalid_argument, "tolerances must be positive");
    const Eigen::Index n = inputs.rows();
    std::vector<std::pair<int, int>> hits;

    auto check_pair = [&](Eigen::Index i, Eigen::Index j) {
        if ((outputs.row(i) - outputs.row(j)).norm() < out_tol &&
            (inputs.row(i) - inputs.row(j)).norm() > in_tol)
            hits.emplace_back(static_cast<int>(i), static_cast<int>(j));
    };

    if (n <= exact_cap) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) check_pair(i, j);
        return hits;
    }

    // distances never grow under orthogonal projection, so hashing the leading
    // principal components with cell size out_tol cannot miss a close pair
    const int proj_dim = static_cast<int>(std::min<Eigen::Index>(3, outputs.cols()));
    Eigen::MatrixXd proj;
    if (proj_dim == outputs.cols()) {
        proj = outputs;
    } else {
        auto p = pca(outputs, true);
        proj = outputs * p.components.leftCols(proj_dim);
    }

    std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
    auto key_of = [&](Eigen::Index i, int da, int db, int dc) {
        CellKey k{0, 0, 0};
        k.a = static_cast<std::int64_t>(std::floor(proj(i, 0) / out_tol)) + da;
        if (proj_dim > 1) k.b = static_cast<std::int64_t>(std::floor(proj(i, 1) / out_tol)) + db;
        if (proj_dim > 2) k.c = static_cast<std::int64_t>(std::floor(proj(i, 2) / out_tol)) + dc;
        return k;
    };
    for (Eigen::Index i = 0; i < n; ++i) grid[key_of(i, 0, 0, 0)].push_back(static_cast<int>(i));

    const int ra = 1, rb = proj_dim > 1 ? 1 : 0, rc = proj_dim > 2 ? 1 : 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int da = -ra; da <= ra; ++da)
            for (int db = -rb; db <= rb; ++db)
                for (int dc = -rc; dc <= rc; ++dc) {
                    auto it = grid.find(key_of(i, da, db, dc));
                    if (it == grid.end()) continue;
                    for (int j : it->second)
                        if (j > static_cast<int>(i)) check_pair(i, j);
                }
    }
    return hits;
}

NullspaceBasis sensitivity_nullspace(ModelId model, const Eigen::VectorXd& point,
                                     const Eigen::VectorXd& initial_state,
                                     const ObservableSpec& obs, const NullspaceOptions& opts) {
    validate_params(model, point);
    const Eigen::Index m = point.size();
    const Eigen::Index n = obs.sample_times.size();

    Eigen::MatrixXd jac(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double h = opts.fd_step_rel * point[j];
        Eigen::VectorXd pp = point, pm = point;
        pp[j] += h;
        pm[j] -= h;
        Eigen::VectorXd yp = simulate_observation(model, pp, initial_state, obs, opts.integrator);
        Eigen::VectorXd ym = simulate_observation(model, pm, initial_state, obs, opts.integrator);
        jac.col(j) = (yp - ym) / (2.0 * h);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullV);
    NullspaceBasis out;
    out.sensitivity = jac;
    out.singular_values = Eigen::VectorXd::Zero(m);
    out.singular_values.head(svd.singularValues().size()) = svd.singularValues();
    out.fim_eigenvalues = out.singular_values.array().square();
    out.rank_threshold = opts.rank_threshold_rel * out.singular_values[0];
    int null_dim = 0;
    for (Eigen::Index i = 0; i < m; ++i)
        if (out.singular_values[i] < out.rank_threshold) ++null_dim;
    out.basis = svd.matrixV().rightCols(null_dim);
    return out;
}

} // namespace effdim
