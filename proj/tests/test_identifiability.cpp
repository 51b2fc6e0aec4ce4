#include "effdim/identifiability.hpp"
#include "effdim/rng.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

using namespace effdim;

TEST_CASE("jacobian determinants: identity map") {
    Rng rng(101, "id");
    Eigen::MatrixXd pts(50, 3);
    for (int i = 0; i < 50; ++i) pts.row(i) << rng.normal(), rng.normal(), rng.normal();
    auto rep = jacobian_determinants(
        [](const Eigen::VectorXd& x) {
            return Eigen::MatrixXd(Eigen::MatrixXd::Identity(x.size(), x.size()));
        },
        pts, false);
    CHECK(rep.sign_consistent);
    CHECK(rep.min_abs_det == doctest::Approx(1.0));
    for (int i = 0; i < 50; ++i) CHECK(rep.determinants[i] == 1.0);
}

TEST_CASE("jacobian determinants: fold map flagged by the analytic oracle") {
    Rng rng(103, "fold");
    Eigen::MatrixXd pts(200, 2);
    for (int i = 0; i < 200; ++i) pts.row(i) << rng.uniform(-1, 1), rng.uniform(0, 1);
    // (x, y) -> (x^2, y): jacobian determinant = 2x, changes sign across x = 0
    auto rep = jacobian_determinants(
        [](const Eigen::VectorXd& x) {
            Eigen::MatrixXd j(2, 2);
            j << 2 * x[0], 0, 0, 1;
            return j;
        },
        pts, false);
    CHECK_FALSE(rep.sign_consistent);
    for (int i = 0; i < 200; ++i)
        CHECK(rep.determinants[i] == doctest::Approx(2 * pts(i, 0)).epsilon(1e-14));

    SUBCASE("the fitted GH map detects the same fold") {
        Eigen::MatrixXd vals(200, 2);
        for (int i = 0; i < 200; ++i) vals.row(i) << pts(i, 0) * pts(i, 0), pts(i, 1);
        GhOptions o;
        o.delta = 1e-10;
        o.epsilon = 4 * epsilon_heuristic(pts);
        auto m = gh_fit(pts, vals, o);
        auto rep2 = jacobian_determinants(m, pts, false);
        CHECK_FALSE(rep2.sign_consistent);
    }
}

TEST_CASE("jacobian determinants: scale normalization preserves signs") {
    Rng rng(107, "scale");
    Eigen::MatrixXd pts(80, 2), outs(80, 2);
    for (int i = 0; i < 80; ++i) {
        pts.row(i) << rng.uniform(0.5, 1.5), rng.uniform(100, 300);
        outs.row(i) << 1e3 * pts(i, 0) + pts(i, 1), 1e-3 * pts(i, 1);
    }
    auto jac = [](const Eigen::VectorXd&) {
        Eigen::MatrixXd j(2, 2);
        j << 1e3, 1, 0, 1e-3;
        return j;
    };
    auto plain = jacobian_determinants(jac, pts, false, outs);
    auto scaled = jacobian_determinants(jac, pts, true, outs);
    CHECK(plain.sign_consistent == scaled.sign_consistent);
    for (int i = 0; i < 80; ++i)
        CHECK((plain.determinants[i] > 0) == (scaled.determinants[i] > 0));
    // normalization brings the magnitude to order one
    CHECK(scaled.min_abs_det > 1e-3);
    CHECK(scaled.determinants.cwiseAbs().maxCoeff() < 1e3);
}

TEST_CASE("injectivity scan: identity map clean, product map caught") {
    Rng rng(109, "inj");
    const int n = 800;
    Eigen::MatrixXd in(n, 2);
    for (int i = 0; i < n; ++i) in.row(i) << rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0);

    SUBCASE("outputs equal inputs") {
        CHECK(injectivity_scan(in, in, 1e-6, 1e-3).empty());
    }
    SUBCASE("f(p1,p2) = p1*p2 has level-set pairs") {
        Eigen::MatrixXd out(n, 1);
        for (int i = 0; i < n; ++i) out(i, 0) = in(i, 0) * in(i, 1);
        auto hits = injectivity_scan(in, out, 1e-2, 0.3);
        CHECK(hits.size() > 50);
        for (auto [i, j] : hits) {
            CHECK(std::abs(out(i, 0) - out(j, 0)) < 1e-2);
            CHECK((in.row(i) - in.row(j)).norm() > 0.3);
        }
    }
}

TEST_CASE("injectivity scan: spatial hash agrees with the exhaustive oracle") {
    Rng rng(113, "hash");
    const int n = 2600; // above the exact cap, forcing the hashed path
    Eigen::MatrixXd in(n, 3), out(n, 4);
    for (int i = 0; i < n; ++i) {
        in.row(i) << rng.normal(), rng.normal(), rng.normal();
        // outputs collapse one input direction -> many near-collisions
        out.row(i) << in(i, 0), in(i, 1), 0.01 * rng.normal(), 0.0;
    }
    double out_tol = 0.05, in_tol = 1.0;
    auto hashed = injectivity_scan(in, out, out_tol, in_tol, 2000);
    auto exact = injectivity_scan(in, out, out_tol, in_tol, n + 1);
    auto norm = [](std::vector<std::pair<int, int>> v) {
        for (auto& p : v)
            if (p.first > p.second) std::swap(p.first, p.second);
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(norm(hashed) == norm(exact));
    CHECK(!exact.empty());
}

TEST_CASE("sensitivity nullspace: dimensions match the known reductions") {
    SUBCASE("compartmental: 4 parameters, 3 effective -> dim 1") {
        const auto& info = model_info(ModelId::compartmental_2);
        ObservableSpec obs{0, info.default_obs_times};
        NullspaceOptions o;
        o.integrator.rtol = 1e-11;
        o.integrator.atol = 1e-13;
        auto ns = sensitivity_nullspace(ModelId::compartmental_2, info.base_point,
                                        info.reference_ic, obs, o);
        CHECK(ns.basis.cols() == 1);
        CHECK((ns.sensitivity * ns.basis).norm() <= 10 * ns.rank_threshold);
    }
    SUBCASE("msp full: 6 parameters, 3 effective -> dim 3") {
        const auto& info = model_info(ModelId::msp_full);
        ObservableSpec obs{4, info.default_obs_times};
        NullspaceOptions o;
        o.integrator.method = OdeMethod::stiff_extrap;
        o.integrator.rtol = 1e-10;
        o.integrator.atol = 1e-12;
        auto ns = sensitivity_nullspace(ModelId::msp_full, info.base_point, info.reference_ic,
                                        obs, o);
        CHECK(ns.basis.cols() == 3);
        for (int c = 0; c < ns.basis.cols(); ++c)
            CHECK((ns.sensitivity * ns.basis.col(c)).norm() <=
                  10 * ns.rank_threshold * std::sqrt(static_cast<double>(ns.basis.cols())));
    }
    SUBCASE("toy enzyme at the worked regime -> dim 2, orthogonal to grad k_eff") {
        const auto& info = model_info(ModelId::toy_enzyme);
        ObservableSpec obs{2, info.default_obs_times};
        NullspaceOptions o;
        o.integrator.method = OdeMethod::stiff_extrap;
        o.integrator.rtol = 1e-10;
        o.integrator.atol = 1e-12;
        auto ns = sensitivity_nullspace(ModelId::toy_enzyme, info.base_point, info.reference_ic,
                                        obs, o);
        REQUIRE(ns.basis.cols() == 2);
        // analytic gradient of k_eff = Etot kf kcat / (kr + kcat)
        double kf = info.base_point[0], kr = info.base_point[1], kcat = info.base_point[2];
        double etot = 0.66, s = kr + kcat;
        Eigen::Vector3d grad(etot * kcat / s, -etot * kf * kcat / (s * s),
                             etot * kf * kr / (s * s));
        grad.normalize();
        for (int c = 0; c < 2; ++c)
            CHECK(std::abs(grad.dot(ns.basis.col(c))) < 1e-3);
    }
}

TEST_CASE("sensitivity nullspace: FIM eigenvalues are squared singular values") {
    const auto& info = model_info(ModelId::compartmental_2);
    ObservableSpec obs{0, info.default_obs_times};
    auto ns = sensitivity_nullspace(ModelId::compartmental_2, info.base_point, info.reference_ic,
                                    obs);
    // two algebraic routes: direct squares vs eigenvalues of J^T J
    Eigen::MatrixXd fim = ns.sensitivity.transpose() * ns.sensitivity;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fim);
    Eigen::VectorXd lam = es.eigenvalues().reverse();
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(ns.fim_eigenvalues[i] - lam[i]) <=
              1e-8 * std::max(1.0, std::abs(lam[i])));
        CHECK(ns.fim_eigenvalues[i] ==
              doctest::Approx(ns.singular_values[i] * ns.singular_values[i]));
    }
}
