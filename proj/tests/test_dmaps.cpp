#include "effdim/dmaps.hpp"
#include "effdim/eigs.hpp"
#include "effdim/errors.hpp"
#include "effdim/rng.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

using namespace effdim;

namespace {

Eigen::MatrixXd circle_points(int n, Rng& rng) {
    // circle of radius 1 in a tilted plane of R^3
    Eigen::Vector3d u(1, 2, 2), v(2, 1, -2);
    u.normalize();
    v.normalize();
    Eigen::MatrixXd x(n, 3);
    for (int i = 0; i < n; ++i) {
        double th = rng.uniform(0, 2 * std::numbers::pi);
        x.row(i) = (std::cos(th) * u + std::sin(th) * v).transpose();
    }
    return x;
}

} // namespace

TEST_CASE("topk eigensolver recovers a planted spectrum") {
    Rng rng(5, "planted");
    const int n = 700;
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd lam(n);
    for (int i = 0; i < n; ++i) lam[i] = std::pow(0.88, i); // decaying PSD spectrum
    Eigen::MatrixXd s = q * lam.asDiagonal() * q.transpose();
    auto top = topk_symmetric_eigs(s, 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(top.eigenvalues[i] == doctest::Approx(lam[i]).epsilon(1e-9));
        double align = std::abs(top.eigenvectors.col(i).dot(q.col(i)));
        CHECK(align == doctest::Approx(1.0).epsilon(1e-7));
    }
}

TEST_CASE("affinity: trivial examples") {
    SUBCASE("identical points have unit affinity") {
        Eigen::MatrixXd pts(2, 2);
        pts << 1.5, -3.0, 1.5, -3.0;
        auto ctx = resolve_kernel(&pts, nullptr, {KernelVariant::plain_input, 1.0}, 0);
        auto a = affinity(ctx);
        CHECK(a(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("epsilon -> infinity flattens the kernel") {
        Eigen::MatrixXd pts(3, 1);
        pts << 0, 5, 9;
        auto ctx = resolve_kernel(&pts, nullptr, {KernelVariant::plain_input, 1e12}, 0);
        auto a = affinity(ctx);
        CHECK(a.minCoeff() > 0.999999);
    }
    SUBCASE("three points on a line, hand-evaluated tail") {
        Eigen::MatrixXd pts(3, 1);
        pts << 0, 1, 2;
        auto ctx = resolve_kernel(&pts, nullptr, {KernelVariant::plain_input, 1.0}, 0);
        auto a = affinity(ctx);
        CHECK(a(0, 2) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
        CHECK(a(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    }
    SUBCASE("output-informed exponent composes input and output terms") {
        // two clusters identical in outputs, separated in inputs: the kernel
        // must still distinguish them through the input block
        Rng rng(3, "oi");
        Eigen::MatrixXd in(40, 2), out(40, 2);
        for (int i = 0; i < 40; ++i) {
            double cluster = (i % 2 == 0) ? 0.0 : 8.0;
            in.row(i) << cluster + rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1);
            out.row(i) << rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1);
        }
        auto ctx = resolve_kernel(&in, &out, {KernelVariant::output_informed, 0.7}, 0);
        auto a = affinity(ctx);
        // same-cluster pairs must be closer than cross-cluster pairs
        CHECK(a(0, 2) > 5 * a(0, 1));
    }
}

TEST_CASE("epsilon heuristic") {
    SUBCASE("two points: the single squared distance") {
        Eigen::MatrixXd pts(2, 2);
        pts << 0, 0, 3, 4;
        CHECK(epsilon_heuristic(pts) == doctest::Approx(25.0).epsilon(1e-14));
    }
    SUBCASE("10x10 unit grid equals the brute-force median") {
        Eigen::MatrixXd pts(100, 2);
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) pts.row(10 * i + j) << i, j;
        std::vector<double> d2;
        for (int i = 0; i < 100; ++i)
            for (int j = i + 1; j < 100; ++j)
                d2.push_back((pts.row(i) - pts.row(j)).squaredNorm());
        std::sort(d2.begin(), d2.end());
        CHECK(epsilon_heuristic(pts) == d2[d2.size() / 2]);
    }
    SUBCASE("homogeneity: scaling points scales epsilon quadratically") {
        Rng rng(1, "eps");
        Eigen::MatrixXd pts(50, 3);
        for (int i = 0; i < 50; ++i)
            pts.row(i) << rng.normal(), rng.normal(), rng.normal();
        double e1 = epsilon_heuristic(pts);
        double e2 = epsilon_heuristic(Eigen::MatrixXd(2.5 * pts));
        CHECK(e2 == doctest::Approx(6.25 * e1).epsilon(1e-12));
    }
    SUBCASE("identical points rejected") {
        Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(5, 2);
        CHECK_THROWS_AS(epsilon_heuristic(pts), Error);
    }
}

TEST_CASE("dmaps_embed: rank-one affinity") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Ones(40, 40);
    auto emb = dmaps_embed(a, 0.0, 3);
    CHECK(emb.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 1; k <= 3; ++k) CHECK(std::abs(emb.eigenvalues[k]) < 1e-10);
    double c0 = emb.eigenvectors(0, 0);
    for (int i = 0; i < 40; ++i) CHECK(emb.eigenvectors(i, 0) == doctest::Approx(c0).epsilon(1e-10));
}

TEST_CASE("dmaps_embed: eigenpairs satisfy the row-stochastic operator") {
    Rng rng(9, "ws");
    Eigen::MatrixXd pts(120, 2);
    for (int i = 0; i < 120; ++i) pts.row(i) << rng.normal(), 0.3 * rng.normal();
    auto ctx = resolve_kernel(&pts, nullptr, {KernelVariant::plain_input, 0.0}, 1.0);
    Eigen::MatrixXd a = affinity(ctx);

    // reference row-stochastic operator built directly from the definition
    Eigen::VectorXd p = a.rowwise().sum();
    Eigen::MatrixXd at = a;
    at.array().colwise() /= p.array();
    at.array().rowwise() /= p.transpose().array();
    Eigen::VectorXd d = at.rowwise().sum();
    Eigen::MatrixXd w = at.array().colwise() / d.array();
    for (int i = 0; i < 120; ++i) CHECK(w.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));

    auto emb = dmaps_embed(std::move(a), 1.0, 6);
    CHECK(emb.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(emb.eigenvalues[6] <= emb.eigenvalues[1]);
    for (int k = 0; k <= 6; ++k) {
        Eigen::VectorXd lhs = w * emb.eigenvectors.col(k);
        Eigen::VectorXd rhs = emb.eigenvalues[k] * emb.eigenvectors.col(k);
        CHECK((lhs - rhs).norm() < 1e-8);
    }
}

TEST_CASE("dmaps_embed: permutation equivariance") {
    Rng rng(11, "perm");
    const int n = 90;
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) pts.row(i) << rng.uniform(0, 3), rng.uniform(0, 1);
    KernelSpec spec{KernelVariant::plain_input, 0.0};
    auto e1 = dmaps_fit(&pts, nullptr, spec, 1.0, 4);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = (7 * i + 3) % n; // a permutation (gcd(7,90)=1)
    Eigen::MatrixXd pp(n, 2);
    for (int i = 0; i < n; ++i) pp.row(i) = pts.row(perm[i]);
    KernelSpec spec2{KernelVariant::plain_input, e1.kernel.spec.epsilon};
    auto e2 = dmaps_fit(&pp, nullptr, spec2, 1.0, 4);

    for (int k = 0; k <= 4; ++k) {
        CHECK(e2.eigenvalues[k] == doctest::Approx(e1.eigenvalues[k]).epsilon(1e-9));
        // align sign via the best-matching orientation then compare entrywise
        double dot = 0;
        for (int i = 0; i < n; ++i) dot += e2.eigenvectors(i, k) * e1.eigenvectors(perm[i], k);
        double sign = dot >= 0 ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i)
            CHECK(e2.eigenvectors(i, k) ==
                  doctest::Approx(sign * e1.eigenvectors(perm[i], k)).epsilon(5e-7).scale(1e-3));
    }
}

TEST_CASE("dmaps_embed: circle eigenfunctions") {
    Rng rng(13, "circle");
    auto pts = circle_points(500, rng);
    double med = epsilon_heuristic(pts);
    auto emb = dmaps_fit(&pts, nullptr, {KernelVariant::plain_input, med / 10}, 1.0, 4);

    // leading nontrivial pair is (cos, sin) up to rotation: eigenvalue pair is
    // nearly degenerate and the embedded radius is nearly constant
    CHECK(std::abs(emb.eigenvalues[1] - emb.eigenvalues[2]) / emb.eigenvalues[1] < 0.05);
    Eigen::VectorXd r2 =
        (emb.eigenvectors.col(1).array().square() + emb.eigenvectors.col(2).array().square())
            .sqrt();
    double mean_r = r2.mean();
    for (int i = 0; i < 500; ++i) CHECK(std::abs(r2[i] - mean_r) < 0.05 * mean_r);
}

TEST_CASE("select_nonharmonic: 1d curve keeps only the first coordinate") {
    Rng rng(17, "curve");
    const int n = 500;
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) {
        double t = 2.0 * i / (n - 1) + rng.uniform(-1e-4, 1e-4);
        pts.row(i) << t, t * t;
    }
    double med = epsilon_heuristic(pts);
    auto emb = dmaps_fit(&pts, nullptr, {KernelVariant::plain_input, med / 10}, 1.0, 8);
    auto sel = select_nonharmonic(emb);
    CHECK(sel == std::vector<int>{1});
    for (int k = 2; k <= 8; ++k) CHECK(emb.residuals[k] < 0.2);
}

TEST_CASE("select_nonharmonic: 5:1 rectangle gives two directions, second late") {
    Rng rng(19, "rect");
    const int n = 1200;
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) pts.row(i) << rng.uniform(0, 5), rng.uniform(0, 1);
    double med = epsilon_heuristic(pts);
    auto emb = dmaps_fit(&pts, nullptr, {KernelVariant::plain_input, med / 10}, 1.0, 9);
    auto sel = select_nonharmonic(emb);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0] == 1);
    // for this aspect ratio several x harmonics precede the first y mode
    CHECK(sel[1] > 2);
}

TEST_CASE("pca") {
    SUBCASE("rank-1 data concentrates all variance in one component") {
        Rng rng(23, "pca1");
        Eigen::VectorXd dir(3);
        dir << 1, -2, 0.5;
        Eigen::MatrixXd data(100, 3);
        for (int i = 0; i < 100; ++i) data.row(i) = rng.normal() * dir.transpose();
        auto s = pca(data, true);
        CHECK(s.explained_variance_ratio[0] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(s.explained_variance_ratio.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("isotropic gaussian cloud in R^4 splits variance evenly") {
        Rng rng(29, "pca2");
        Eigen::MatrixXd data(10000, 4);
        for (int i = 0; i < 10000; ++i)
            for (int j = 0; j < 4; ++j) data(i, j) = rng.normal();
        auto s = pca(data, true);
        for (int j = 0; j < 4; ++j)
            CHECK(std::abs(s.explained_variance_ratio[j] - 0.25) < 0.02);
    }
}

TEST_CASE("embedding save/load round trip keeps the kernel context") {
    Rng rng(31, "io");
    Eigen::MatrixXd in(60, 2), out(60, 3);
    for (int i = 0; i < 60; ++i) {
        in.row(i) << rng.uniform(0, 1), rng.uniform(0, 2);
        out.row(i) << in(i, 0) + in(i, 1), in(i, 0) - in(i, 1), 0.1 * rng.normal();
    }
    auto emb = dmaps_fit(&in, &out, {KernelVariant::output_informed, 0.6}, 1.0, 5);
    select_nonharmonic(emb);
    auto dir = (std::filesystem::temp_directory_path() / "effdim_test_emb").string();
    emb.save(dir);
    auto back = Embedding::load(dir);
    CHECK((back.eigenvalues - emb.eigenvalues).norm() < 1e-12);
    CHECK((back.eigenvectors - emb.eigenvectors).norm() < 1e-10);
    CHECK(back.nonharmonic == emb.nonharmonic);
    CHECK(back.kernel.spec.epsilon == emb.kernel.spec.epsilon);
    CHECK(back.kernel.in_block_scale == doctest::Approx(emb.kernel.in_block_scale));
    CHECK((back.kernel.d_diag - emb.kernel.d_diag).norm() < 1e-9);
}
