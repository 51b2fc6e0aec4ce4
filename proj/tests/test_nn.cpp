#include "effdim/conformal_ae.hpp"
#include "effdim/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace effdim;

namespace {

// One scalar knob at a time: finite-difference derivative of `loss_of` with
// respect to every weight/bias entry of `net`, compared against `analytic`.
template <class LossFn>
void check_grads_against_fd(Mlp& net, const MlpGrads& analytic, const LossFn& loss_of,
                            double h = 1e-6, double tol = 1e-4) {
    for (int l = 0; l < net.n_layers(); ++l) {
        for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i)
            for (Eigen::Index j = 0; j < net.weights[l].cols(); ++j) {
                double keep = net.weights[l](i, j);
                net.weights[l](i, j) = keep + h;
                double lp = loss_of();
                net.weights[l](i, j) = keep - h;
                double lm = loss_of();
                net.weights[l](i, j) = keep;
                double fd = (lp - lm) / (2 * h);
                double scale = std::max({1e-8, std::abs(fd), std::abs(analytic.w[l](i, j))});
                CHECK(std::abs(analytic.w[l](i, j) - fd) / scale < tol);
            }
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
            double keep = net.biases[l][i];
            net.biases[l][i] = keep + h;
            double lp = loss_of();
            net.biases[l][i] = keep - h;
            double lm = loss_of();
            net.biases[l][i] = keep;
            double fd = (lp - lm) / (2 * h);
            double scale = std::max({1e-8, std::abs(fd), std::abs(analytic.b[l][i])});
            CHECK(std::abs(analytic.b[l][i] - fd) / scale < tol);
        }
    }
}

} // namespace

TEST_CASE("mlp: zero weights give the final bias") {
    Rng rng(201, "mlp0");
    Mlp net = Mlp::create({2, 5, 3}, rng);
    for (auto& w : net.weights) w.setZero();
    for (auto& b : net.biases) b.setZero();
    net.biases.back() << 1.5, -2.0, 0.25;
    Eigen::MatrixXd x(4, 2);
    x.setRandom();
    Eigen::MatrixXd y = net.forward(x);
    for (int i = 0; i < 4; ++i) {
        CHECK(y(i, 0) == 1.5);
        CHECK(y(i, 1) == -2.0);
        CHECK(y(i, 2) == 0.25);
    }
}

TEST_CASE("mlp: input jacobian matches finite differences") {
    Rng rng(203, "mlpj");
    Mlp net = Mlp::create({3, 8, 8, 2}, rng);
    Eigen::VectorXd x(3);
    x << 0.3, -0.7, 1.1;
    Eigen::MatrixXd j = net.input_jacobian(x);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        Eigen::VectorXd fd =
            (net.forward(xp.transpose()) - net.forward(xm.transpose())).transpose() / (2 * h);
        for (int i = 0; i < 2; ++i)
            CHECK(std::abs(j(i, k) - fd[i]) / std::max(1e-8, std::abs(fd[i])) < 1e-5);
    }
}

TEST_CASE("mlp: backward pass matches finite differences (plain MSE)") {
    Rng rng(205, "mlpb");
    Mlp net = Mlp::create({3, 4, 4, 3}, rng);
    Eigen::MatrixXd x(7, 3), y(7, 3);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 3; ++j) {
            x(i, j) = rng.uniform(-1, 1);
            y(i, j) = rng.uniform(-1, 1);
        }
    auto loss_of = [&]() {
        Eigen::MatrixXd e = net.forward(x) - y;
        return e.squaredNorm() / static_cast<double>(e.size());
    };
    MlpGrads g;
    g.init_like(net);
    auto acts = net.forward_cached(x);
    Eigen::MatrixXd err = acts.back() - y;
    mlp_backward(net, acts, (2.0 / static_cast<double>(err.size())) * err, g);
    check_grads_against_fd(net, g, loss_of);
}

TEST_CASE("cae: nested conformality gradient matches finite differences") {
    Rng rng(207, "nested");
    Mlp enc = Mlp::create({3, 4, 4, 3}, rng);
    Eigen::MatrixXd x(9, 3);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform(-1, 1);
    const double alpha = 33.0;

    auto penalty_of = [&]() {
        MlpGrads scratch;
        scratch.init_like(enc);
        std::vector<Eigen::MatrixXd> extra;
        auto acts = enc.forward_cached(x);
        return cae_detail::conformality_penalty_and_grads(enc, acts, alpha, scratch, extra);
    };

    // full gradient: tangent-path weight terms plus the activation adjoints
    // pushed through the primal reverse sweep
    MlpGrads g;
    g.init_like(enc);
    std::vector<Eigen::MatrixXd> extra;
    auto acts = enc.forward_cached(x);
    cae_detail::conformality_penalty_and_grads(enc, acts, alpha, g, extra);
    Eigen::MatrixXd zero_out = Eigen::MatrixXd::Zero(9, 3);
    mlp_backward(enc, acts, zero_out, g, &extra);
    check_grads_against_fd(enc, g, penalty_of);
}

TEST_CASE("cae: combined step-A loss gradient (reconstruction + conformality)") {
    Rng rng(209, "steba");
    Mlp enc = Mlp::create({3, 4, 4, 3}, rng);
    Mlp dec = Mlp::create({3, 4, 4, 3}, rng);
    Eigen::MatrixXd x(6, 3);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform(-1, 1);
    const double alpha = 7.0;

    auto loss_of = [&]() {
        Eigen::MatrixXd nu = enc.forward(x);
        Eigen::MatrixXd e = dec.forward(nu) - x;
        double recon = e.squaredNorm() / static_cast<double>(e.size());
        MlpGrads scratch;
        scratch.init_like(enc);
        std::vector<Eigen::MatrixXd> extra;
        auto acts = enc.forward_cached(x);
        return recon + cae_detail::conformality_penalty_and_grads(enc, acts, alpha, scratch, extra);
    };

    MlpGrads ge, gd;
    ge.init_like(enc);
    gd.init_like(dec);
    auto enc_acts = enc.forward_cached(x);
    auto dec_acts = dec.forward_cached(enc_acts.back());
    Eigen::MatrixXd err = dec_acts.back() - x;
    Eigen::MatrixXd d_nu =
        mlp_backward(dec, dec_acts, (2.0 / static_cast<double>(err.size())) * err, gd);
    std::vector<Eigen::MatrixXd> extra;
    cae_detail::conformality_penalty_and_grads(enc, enc_acts, alpha, ge, extra);
    mlp_backward(enc, enc_acts, d_nu, ge, &extra);

    check_grads_against_fd(enc, ge, loss_of);
    check_grads_against_fd(dec, gd, loss_of);
}

TEST_CASE("regression: straight line learned to high accuracy") {
    Rng rng(211, "line");
    Eigen::MatrixXd x(1000, 1), y(1000, 1);
    for (int i = 0; i < 1000; ++i) {
        x(i, 0) = rng.uniform(0, 1);
        y(i, 0) = 2.0 * x(i, 0);
    }
    MlpTrainConfig cfg;
    cfg.hidden = {20, 20};
    cfg.epochs = 4000;
    cfg.plateau_epochs = 800;
    cfg.seed = 3;
    auto reg = mlp_train_regression(x, y, cfg);
    Eigen::MatrixXd xt(200, 1), yt(200, 1);
    for (int i = 0; i < 200; ++i) {
        xt(i, 0) = rng.uniform(0.02, 0.98);
        yt(i, 0) = 2.0 * xt(i, 0);
    }
    double mse = (reg.predict(xt) - yt).squaredNorm() / 200.0;
    CHECK(mse < 1e-5);
}

TEST_CASE("regression: natural-unit jacobian matches finite differences") {
    Rng rng(213, "regj");
    Eigen::MatrixXd x(400, 2), y(400, 1);
    for (int i = 0; i < 400; ++i) {
        x.row(i) << rng.uniform(10, 20), rng.uniform(0.1, 0.2);
        y(i, 0) = x(i, 0) * x(i, 1);
    }
    MlpTrainConfig cfg;
    cfg.hidden = {16, 16};
    cfg.epochs = 1500;
    cfg.seed = 5;
    auto reg = mlp_train_regression(x, y, cfg);
    Eigen::VectorXd p(2);
    p << 15.0, 0.15;
    Eigen::MatrixXd j = reg.jacobian(p);
    for (int k = 0; k < 2; ++k) {
        double h = 1e-5 * p[k];
        Eigen::VectorXd pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        double fd = (reg.predict(pp.transpose())(0, 0) - reg.predict(pm.transpose())(0, 0)) /
                    (2 * h);
        CHECK(std::abs(j(0, k) - fd) / std::max(1e-8, std::abs(fd)) < 1e-4);
    }
}

TEST_CASE("cae: deterministic training and decreasing best loss") {
    Rng rng(215, "caedata");
    const int n = 300;
    Eigen::MatrixXd params(n, 2), behav(n, 3);
    for (int i = 0; i < n; ++i) {
        double a = rng.uniform(0.5, 1.5), b = rng.uniform(0.5, 1.5);
        params.row(i) << a, b;
        double s = a * b; // effective combination
        behav.row(i) << s, std::exp(-s), s * s;
    }
    CaeConfig cfg;
    cfg.d_eff = 1;
    cfg.epochs = 400;
    cfg.plateau_epochs = 400;
    cfg.seed = 77;
    auto r1 = train_conformal_ae(params, behav, cfg);
    auto r2 = train_conformal_ae(params, behav, cfg);
    CHECK(r1.loss_history == r2.loss_history);

    // best-so-far total loss is nonincreasing and improves overall
    double first = r1.loss_history.row(0).sum();
    double best = first;
    for (Eigen::Index e = 0; e < r1.loss_history.rows(); ++e)
        best = std::min(best, r1.loss_history.row(e).sum());
    CHECK(best < 0.5 * first);
}

TEST_CASE("cae: d_eff = m degenerates to a regularized autoencoder") {
    Rng rng(217, "caefull");
    const int n = 400;
    Eigen::MatrixXd params(n, 2), behav(n, 2);
    for (int i = 0; i < n; ++i) {
        double a = rng.uniform(0.5, 1.5), b = rng.uniform(0.5, 1.5);
        params.row(i) << a, b;
        behav.row(i) << a + b, a - b;
    }
    CaeConfig cfg;
    cfg.d_eff = 2;
    cfg.epochs = 3000;
    cfg.plateau_epochs = 3000;
    cfg.seed = 11;
    auto r = train_conformal_ae(params, behav, cfg);
    CHECK(r.loss_history(r.loss_history.rows() - 1, 0) < 1e-3); // reconstruction MSE
}

TEST_CASE("cae: conformality residual of a linear orthogonal encoder is zero") {
    CaeWeights w;
    w.d_eff = 1;
    Rng rng(219, "lin");
    w.encoder = Mlp::create({2, 2}, rng);
    double th = 0.6;
    w.encoder.weights[0] << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    w.encoder.biases[0].setZero();
    w.in_scaler.mean = Eigen::VectorXd::Zero(2);
    w.in_scaler.std = Eigen::VectorXd::Ones(2);
    Eigen::MatrixXd pts(10, 2);
    pts.setRandom();
    Eigen::VectorXd res = conformality_residual(w, pts);
    REQUIRE(res.size() == 1);
    CHECK(res[0] < 1e-10);
}

TEST_CASE("cae: encoder jacobian matches finite differences in natural units") {
    Rng rng(221, "caej");
    const int n = 50;
    Eigen::MatrixXd params(n, 3), behav(n, 2);
    for (int i = 0; i < n; ++i) {
        params.row(i) << rng.uniform(1, 2), rng.uniform(100, 200), rng.uniform(0.01, 0.02);
        behav.row(i) << params(i, 0), params(i, 1) * params(i, 2);
    }
    CaeConfig cfg;
    cfg.d_eff = 1;
    cfg.epochs = 50;
    cfg.plateau_epochs = 50;
    cfg.seed = 13;
    auto r = train_conformal_ae(params, behav, cfg);
    Eigen::VectorXd p = params.row(7).transpose();
    Eigen::MatrixXd j = encoder_input_jacobian(r.weights, p, true);
    for (int k = 0; k < 3; ++k) {
        double h = 1e-5 * p[k];
        Eigen::VectorXd pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        Eigen::VectorXd fd = (r.weights.encode(pp.transpose()) -
                              r.weights.encode(pm.transpose()))
                                 .transpose() /
                             (2 * h);
        for (int i = 0; i < 3; ++i)
            CHECK(std::abs(j(i, k) - fd[i]) / std::max(1e-6, std::abs(fd[i])) < 1e-4);
    }
}

TEST_CASE("cae: save/load round trip") {
    Rng rng(223, "caeio");
    const int n = 60;
    Eigen::MatrixXd params(n, 2), behav(n, 2);
    for (int i = 0; i < n; ++i) {
        params.row(i) << rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5);
        behav.row(i) << params(i, 0) * params(i, 1), params(i, 0);
    }
    CaeConfig cfg;
    cfg.d_eff = 1;
    cfg.epochs = 30;
    cfg.plateau_epochs = 30;
    cfg.seed = 17;
    cfg.train_estimator = true;
    auto r = train_conformal_ae(params, behav, cfg);
    auto stem = (std::filesystem::temp_directory_path() / "effdim_cae" / "cae").string();
    r.weights.save(stem);
    auto back = CaeWeights::load(stem);
    Eigen::MatrixXd q = params.topRows(5);
    CHECK((back.encode(q) - r.weights.encode(q)).norm() == 0.0);
    CHECK((back.decode(back.encode(q)) - r.weights.decode(r.weights.encode(q))).norm() == 0.0);
    CHECK((back.estimate_latents(behav.topRows(5)) -
           r.weights.estimate_latents(behav.topRows(5)))
              .norm() == 0.0);
}
