#include "effdim/extension.hpp"
#include "effdim/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace effdim;

namespace {

Eigen::MatrixXd grid2d(int nx, int ny, double lx = 1.0, double ly = 1.0) {
    Eigen::MatrixXd pts(nx * ny, 2);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            pts.row(i * ny + j) << lx * i / (nx - 1.0), ly * j / (ny - 1.0);
    return pts;
}

} // namespace

TEST_CASE("nystrom: training points restrict to their own coordinates") {
    Rng rng(41, "nys");
    Eigen::MatrixXd pts(300, 2);
    for (int i = 0; i < 300; ++i) pts.row(i) << rng.uniform(0, 2), rng.uniform(0, 1);
    auto emb = dmaps_fit(&pts, nullptr, {KernelVariant::plain_input, 0.0}, 1.0, 6);
    for (int i : {0, 17, 299}) {
        Eigen::VectorXd x = pts.row(i).transpose();
        Eigen::VectorXd phi = nystrom_extend(emb, &x, nullptr);
        for (int b = 0; b <= 6; ++b) {
            double ref = emb.eigenvectors(i, b);
            CHECK(std::abs(phi[b] - ref) <= 1e-8 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("nystrom: unseen circle points land on the embedded circle") {
    const int n = 400;
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) {
        double th = 2 * std::numbers::pi * i / n;
        pts.row(i) << std::cos(th), std::sin(th);
    }
    double med = epsilon_heuristic(pts);
    auto emb = dmaps_fit(&pts, nullptr, {KernelVariant::plain_input, med / 10}, 1.0, 3);

    // embedding radius from the training points
    Eigen::ArrayXd r_train = (emb.eigenvectors.col(1).array().square() +
                              emb.eigenvectors.col(2).array().square())
                                 .sqrt();
    double r0 = r_train.mean();
    for (int k = 0; k < 25; ++k) {
        double th = 2 * std::numbers::pi * (k + 0.5) / 25 + 0.001; // between samples
        Eigen::VectorXd x(2);
        x << std::cos(th), std::sin(th);
        Eigen::VectorXd phi = nystrom_extend(emb, &x, nullptr);
        double r = std::hypot(phi[1], phi[2]);
        CHECK(std::abs(r - r0) < 0.01 * r0);
    }
}

TEST_CASE("gh: constant functions extend exactly") {
    Rng rng(43, "ghc");
    Eigen::MatrixXd pts(200, 2);
    for (int i = 0; i < 200; ++i) pts.row(i) << rng.uniform(0, 1), rng.uniform(0, 1);
    Eigen::MatrixXd f = Eigen::MatrixXd::Constant(200, 1, 3.25);
    auto m = gh_fit(pts, f, {});
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd x(2);
        x << rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9);
        CHECK(std::abs(gh_eval(m, x)[0] - 3.25) < 1e-8);
        CHECK(gh_gradient(m, x).norm() < 1e-8);
    }
}

TEST_CASE("gh: linear function on a grid, held-out accuracy") {
    Eigen::MatrixXd pts = grid2d(20, 20);
    Eigen::MatrixXd f(pts.rows(), 1);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) f(i, 0) = 2.0 * pts(i, 0) - 0.7 * pts(i, 1) + 1.5;
    GhOptions opts;
    opts.delta = 1e-12;
    opts.epsilon = 3 * epsilon_heuristic(pts);
    auto m = gh_fit(pts, f, opts);
    Rng rng(47, "ghl");
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd x(2);
        x << rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9);
        double truth = 2.0 * x[0] - 0.7 * x[1] + 1.5;
        CHECK(std::abs(gh_eval(m, x)[0] - truth) / std::abs(truth) < 1e-4);
    }
}

TEST_CASE("gh: quadratic on the unit square within 1e-3 absolute") {
    Eigen::MatrixXd pts = grid2d(25, 25);
    Eigen::MatrixXd f(pts.rows(), 1);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        double x = pts(i, 0), y = pts(i, 1);
        f(i, 0) = x * x + 0.5 * x * y - y * y + 0.3;
    }
    GhOptions opts;
    opts.delta = 1e-8;
    auto m = gh_fit(pts, f, opts);
    Rng rng(53, "ghq");
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd x(2);
        x << rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9);
        double truth = x[0] * x[0] + 0.5 * x[0] * x[1] - x[1] * x[1] + 0.3;
        CHECK(std::abs(gh_eval(m, x)[0] - truth) < 1e-3);
    }
}

TEST_CASE("gh: analytic gradient matches central finite differences") {
    Rng rng(59, "ghg");
    Eigen::MatrixXd pts(300, 2);
    Eigen::MatrixXd f(300, 2);
    for (int i = 0; i < 300; ++i) {
        double x = rng.uniform(0, 1), y = rng.uniform(0, 1);
        pts.row(i) << x, y;
        f.row(i) << std::sin(3 * x) * y, x * x - y;
    }
    auto m = gh_fit(pts, f, {});
    const double h = 1e-5;
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd x(2);
        x << rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8);
        Eigen::MatrixXd g = gh_gradient(m, x);
        for (int j = 0; j < 2; ++j) {
            Eigen::VectorXd xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            Eigen::VectorXd fd = (gh_eval(m, xp) - gh_eval(m, xm)) / (2 * h);
            for (int out = 0; out < 2; ++out) {
                double scale = std::max(1e-6, std::abs(fd[out]));
                CHECK(std::abs(g(out, j) - fd[out]) / scale < 1e-4);
            }
        }
    }
}

TEST_CASE("gh: per-point-weight evaluation equals the explicit mode sum") {
    Rng rng(61, "ghm");
    Eigen::MatrixXd pts(150, 3);
    Eigen::MatrixXd f(150, 2);
    for (int i = 0; i < 150; ++i) {
        pts.row(i) << rng.normal(), rng.normal(), rng.normal();
        f.row(i) << pts(i, 0) * pts(i, 1), std::cos(pts(i, 2));
    }
    auto m = gh_fit(pts, f, {});
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd x(3);
        x << rng.normal(), rng.normal(), rng.normal();
        Eigen::VectorXd a = gh_eval(m, x);
        Eigen::VectorXd b = gh_eval_modes(m, x);
        CHECK((a - b).norm() < 1e-11 * std::max(1.0, b.norm()));
    }
}

TEST_CASE("gh: decreasing delta never hurts training reconstruction") {
    Rng rng(67, "ghd");
    Eigen::MatrixXd pts(250, 2);
    Eigen::MatrixXd f(250, 1);
    for (int i = 0; i < 250; ++i) {
        pts.row(i) << rng.uniform(0, 1), rng.uniform(0, 1);
        f(i, 0) = std::sin(5 * pts(i, 0)) + pts(i, 1);
    }
    double prev = -1.0;
    for (double delta : {1e-2, 1e-4, 1e-6, 1e-8}) {
        GhOptions opts;
        opts.delta = delta;
        auto m = gh_fit(pts, f, opts);
        double err = gh_training_residual(m, f)[0];
        if (prev >= 0) CHECK(err <= prev * (1 + 1e-12));
        prev = err;
    }
}

TEST_CASE("gh: empty retained set reported") {
    Eigen::MatrixXd pts(4, 1);
    pts << 0, 1, 2, 3;
    Eigen::MatrixXd f(4, 1);
    f << 1, 2, 3, 4;
    GhOptions opts;
    opts.delta = 0.9999999; // nothing but sigma_0 strictly above delta*sigma_0
    auto m = gh_fit(pts, f, opts); // sigma_0 itself always retained
    CHECK(m.basis_eigvals.size() >= 1);
}

TEST_CASE("double dmaps: reproduces its own coordinates") {
    Rng rng(71, "dd");
    Eigen::MatrixXd pts(400, 3);
    for (int i = 0; i < 400; ++i) {
        double t = rng.uniform(0, 2), s = rng.uniform(0, 1);
        pts.row(i) << t, s, 0.5 * t - 0.2 * s; // planar 2d manifold in R^3
    }
    double med = epsilon_heuristic(pts);
    auto emb = dmaps_fit(&pts, nullptr, {KernelVariant::plain_input, med / 8}, 1.0, 8);
    select_nonharmonic(emb);
    REQUIRE(emb.nonharmonic.size() >= 2);

    Eigen::MatrixXd targets = emb.selected_coords();
    GhOptions opts;
    opts.delta = 1e-12;
    opts.epsilon = 20 * epsilon_heuristic(targets);
    auto m = double_dmaps_fit(emb, targets, opts);
    for (int i : {3, 99, 250}) {
        Eigen::VectorXd phi = targets.row(i).transpose();
        Eigen::VectorXd rec = double_dmaps_eval(m, phi);
        CHECK((rec - phi).norm() < 1e-6);
    }
}

TEST_CASE("gh model save/load round trip") {
    Rng rng(73, "ghio");
    Eigen::MatrixXd pts(100, 2), f(100, 3);
    for (int i = 0; i < 100; ++i) {
        pts.row(i) << rng.uniform(0, 1), rng.uniform(0, 1);
        f.row(i) << pts(i, 0), pts(i, 1), pts(i, 0) * pts(i, 1);
    }
    auto m = gh_fit(pts, f, {});
    auto stem = (std::filesystem::temp_directory_path() / "effdim_gh" / "gh_model").string();
    m.save(stem);
    auto back = GhModel::load(stem);
    Eigen::VectorXd x(2);
    x << 0.4, 0.6;
    CHECK((gh_eval(back, x) - gh_eval(m, x)).norm() == 0.0);
    CHECK(back.basis_eigvals.size() == m.basis_eigvals.size());
}
