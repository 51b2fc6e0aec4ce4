#include "effdim/conformal_ae.hpp"

#include "effdim/csv.hpp"
#include "effdim/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

namespace effdim {

namespace cae_detail {

/// Exact gradient of the conformality penalty
///   alpha * sum_{i<j} (1/B) sum_b <d nu_i, d nu_j>_b^2
/// with respect to the encoder parameters: forward input-tangents through the
/// cached primal pass, per-sample pair couplings, then reverse accumulation
/// through the tangent recursion. Weight gradients go straight into `grads`;
/// the parts that flow through tanh'(z) surface as extra adjoints on the
/// hidden activations, to be added during the primal reverse sweep.
double conformality_penalty_and_grads(const Mlp& enc, const std::vector<Eigen::MatrixXd>& acts,
                                      double alpha, MlpGrads& grads,
                                      std::vector<Eigen::MatrixXd>& extra_adjoints) {
    const int layers = enc.n_layers();
    const Eigen::Index batch = acts[0].rows();
    const int m = enc.in_dim();
    const int out = enc.out_dim();

    // deriv[l] = 1 - a_l^2 for hidden layers
    std::vector<Eigen::MatrixXd> deriv(static_cast<size_t>(layers));
    for (int l = 1; l < layers; ++l)
        deriv[static_cast<size_t>(l)] = 1.0 - acts[static_cast<size_t>(l)].array().square();

    // tangent stacks per input direction k: s[k][l], t[k][l] (l = 1..layers)
    std::vector<std::vector<Eigen::MatrixXd>> s(static_cast<size_t>(m)),
        t(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
        auto& sk = s[static_cast<size_t>(k)];
        auto& tk = t[static_cast<size_t>(k)];
        sk.resize(static_cast<size_t>(layers) + 1);
        tk.resize(static_cast<size_t>(layers) + 1);
        tk[0] = Eigen::MatrixXd::Zero(batch, m);
        tk[0].col(k).setOnes();
        for (int l = 1; l <= layers; ++l) {
            sk[static_cast<size_t>(l)] =
                tk[static_cast<size_t>(l - 1)] * enc.weights[static_cast<size_t>(l - 1)].transpose();
            if (l < layers)
                tk[static_cast<size_t>(l)] =
                    deriv[static_cast<size_t>(l)].array() * sk[static_cast<size_t>(l)].array();
            else
                tk[static_cast<size_t>(l)] = sk[static_cast<size_t>(l)];
        }
    }

    // per-sample pair couplings and the adjoint of the jacobian entries
    double penalty = 0.0;
    std::vector<Eigen::MatrixXd> tbar(static_cast<size_t>(m),
                                      Eigen::MatrixXd::Zero(batch, out));
    const double w = alpha / static_cast<double>(batch);
    Eigen::MatrixXd jac(out, m), g0(out, out), jbar(out, m);
    for (Eigen::Index b = 0; b < batch; ++b) {
        for (int k = 0; k < m; ++k)
            jac.col(k) = t[static_cast<size_t>(k)][static_cast<size_t>(layers)].row(b).transpose();
        g0.noalias() = jac * jac.transpose();
        g0.diagonal().setZero();
        penalty += 0.5 * w * g0.array().square().sum(); // each pair counted twice
        jbar.noalias() = (2.0 * w) * (g0 * jac);
        for (int k = 0; k < m; ++k)
            tbar[static_cast<size_t>(k)].row(b) = jbar.col(k).transpose();
    }

    // reverse sweep through the tangent recursion
    extra_adjoints.assign(static_cast<size_t>(layers) + 1, Eigen::MatrixXd());
    std::vector<Eigen::MatrixXd> pbar(static_cast<size_t>(layers));
    for (int k = 0; k < m; ++k) {
        Eigen::MatrixXd tb = tbar[static_cast<size_t>(k)];
        for (int l = layers; l >= 1; --l) {
            Eigen::MatrixXd sb;
            if (l == layers) {
                sb = std::move(tb);
            } else {
                sb = deriv[static_cast<size_t>(l)].array() * tb.array();
                auto& pb = pbar[static_cast<size_t>(l)];
                if (pb.size() == 0) pb = Eigen::MatrixXd::Zero(batch, sb.cols());
                pb.array() += tb.array() * s[static_cast<size_t>(k)][static_cast<size_t>(l)].array();
            }
            grads.w[static_cast<size_t>(l - 1)].noalias() +=
                sb.transpose() * t[static_cast<size_t>(k)][static_cast<size_t>(l - 1)];
            if (l > 1) tb = sb * enc.weights[static_cast<size_t>(l - 1)];
        }
    }
    for (int l = 1; l < layers; ++l) {
        if (pbar[static_cast<size_t>(l)].size() == 0) continue;
        extra_adjoints[static_cast<size_t>(l)] =
            (-2.0 * acts[static_cast<size_t>(l)].array() * pbar[static_cast<size_t>(l)].array())
                .matrix();
    }
    return penalty;
}

} // namespace cae_detail

namespace {

std::vector<int> subnet_dims(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> d{in};
    d.insert(d.end(), hidden.begin(), hidden.end());
    d.push_back(out);
    return d;
}

} // namespace

Eigen::MatrixXd CaeWeights::encode(const Eigen::MatrixXd& params_natural) const {
    return encoder.forward(in_scaler.apply(params_natural));
}

Eigen::MatrixXd CaeWeights::decode(const Eigen::MatrixXd& latents) const {
    return in_scaler.invert(decoder.forward(latents));
}

Eigen::MatrixXd CaeWeights::predict_behavior(const Eigen::MatrixXd& latents_meaningful) const {
    return out_scaler.invert(behavior.forward(latents_meaningful));
}

Eigen::MatrixXd CaeWeights::estimate_latents(const Eigen::MatrixXd& behaviors_natural) const {
    require(estimator.has_value(), ErrorCode::invalid_argument,
            "this model was trained without the parameter-estimator subnet");
    return estimator->forward(out_scaler.apply(behaviors_natural));
}

CaeTrainResult train_conformal_ae(const Eigen::MatrixXd& params, const Eigen::MatrixXd& behaviors,
                                  const CaeConfig& cfg) {
    const Eigen::Index n = params.rows();
    require(behaviors.rows() == n && n >= 2, ErrorCode::invalid_argument,
            "params/behaviors must have matching rows");
    const int m = static_cast<int>(params.cols());
    require(cfg.d_eff >= 1 && cfg.d_eff <= m, ErrorCode::invalid_argument,
            "d_eff must lie in [1, parameter count]");

    CaeTrainResult res;
    CaeWeights& w = res.weights;
    w.d_eff = cfg.d_eff;
    w.in_scaler = Scaler::fit(params);
    w.out_scaler = Scaler::fit(behaviors);
    Eigen::MatrixXd x = w.in_scaler.apply(params);
    Eigen::MatrixXd y = w.out_scaler.apply(behaviors);

    Rng rng(cfg.seed, "conformal_ae");
    Rng r1 = rng.substream("encoder"), r2 = rng.substream("decoder"),
        r3 = rng.substream("behavior");
    w.encoder = Mlp::create(subnet_dims(m, cfg.hidden, m), r1);
    w.decoder = Mlp::create(subnet_dims(m, cfg.hidden, m), r2);
    w.behavior = Mlp::create(subnet_dims(cfg.d_eff, cfg.hidden, static_cast<int>(y.cols())), r3);

    AdamState a_enc, a_dec, a_beh;
    a_enc.init_like(w.encoder);
    a_dec.init_like(w.decoder);
    a_beh.init_like(w.behavior);
    MlpGrads g_enc, g_dec, g_beh;
    g_enc.init_like(w.encoder);
    g_dec.init_like(w.decoder);
    g_beh.init_like(w.behavior);

    const Eigen::Index batch = cfg.batch > 0 ? std::min<Eigen::Index>(cfg.batch, n) : n;
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng shuffle_rng = rng.substream("shuffle");

    std::vector<Eigen::Vector3d> history;
    history.reserve(static_cast<size_t>(cfg.epochs));
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;

    std::vector<Eigen::MatrixXd> extra;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (batch < n) {
            for (Eigen::Index i = n - 1; i > 0; --i) {
                auto j = static_cast<Eigen::Index>(shuffle_rng.next_u64() %
                                                   static_cast<std::uint64_t>(i + 1));
                std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
            }
        }
        Eigen::Vector3d sums = Eigen::Vector3d::Zero();
        Eigen::Index done = 0;
        while (done < n) {
            Eigen::Index bs = std::min<Eigen::Index>(batch, n - done);
            Eigen::MatrixXd xb, yb;
            if (batch < n) {
                xb.resize(bs, x.cols());
                yb.resize(bs, y.cols());
                for (Eigen::Index i = 0; i < bs; ++i) {
                    xb.row(i) = x.row(order[static_cast<size_t>(done + i)]);
                    yb.row(i) = y.row(order[static_cast<size_t>(done + i)]);
                }
            } else {
                xb = x;
                yb = y;
            }

            // ---- step A: autoencoder + conformality, updates encoder+decoder
            auto enc_acts = w.encoder.forward_cached(xb);
            auto dec_acts = w.decoder.forward_cached(enc_acts.back());
            Eigen::MatrixXd err = dec_acts.back() - xb;
            double l_recon = err.squaredNorm() / static_cast<double>(err.size());
            g_dec.zero();
            Eigen::MatrixXd d_nu = mlp_backward(
                w.decoder, dec_acts, (2.0 / static_cast<double>(err.size())) * err, g_dec);
            g_enc.zero();
            double l_ortho = cae_detail::conformality_penalty_and_grads(
                w.encoder, enc_acts, cfg.alpha_ortho, g_enc, extra);
            mlp_backward(w.encoder, enc_acts, d_nu, g_enc, &extra);
            a_enc.step(w.encoder, g_enc, cfg.lr_encoder);
            a_dec.step(w.decoder, g_dec, cfg.lr_decoder);

            // ---- step B: behavior estimator reads the meaningful latents,
            //      updates encoder+behavior
            enc_acts = w.encoder.forward_cached(xb);
            Eigen::MatrixXd nu_eff = enc_acts.back().leftCols(cfg.d_eff);
            auto beh_acts = w.behavior.forward_cached(nu_eff);
            Eigen::MatrixXd err2 = beh_acts.back() - yb;
            double l_beh = err2.squaredNorm() / static_cast<double>(err2.size());
            g_beh.zero();
            Eigen::MatrixXd d_nu_eff = mlp_backward(
                w.behavior, beh_acts, (2.0 / static_cast<double>(err2.size())) * err2, g_beh);
            Eigen::MatrixXd d_nu_full = Eigen::MatrixXd::Zero(bs, m);
            d_nu_full.leftCols(cfg.d_eff) = d_nu_eff;
            g_enc.zero();
            mlp_backward(w.encoder, enc_acts, d_nu_full, g_enc);
            a_enc.step(w.encoder, g_enc, cfg.lr_encoder);
            a_beh.step(w.behavior, g_beh, cfg.lr_behavior);

            double total = l_recon + l_ortho + l_beh;
            require(std::isfinite(total), ErrorCode::numeric_failure,
                    "conformal autoencoder training produced a non-finite loss");
            require(total < cfg.divergence_cap, ErrorCode::numeric_failure,
                    "conformal autoencoder training diverged");
            sums += Eigen::Vector3d(l_recon, l_ortho, l_beh) * static_cast<double>(bs);
            done += bs;
        }
        sums /= static_cast<double>(n);
        history.push_back(sums);
        double total = sums.sum();
        if (total < best * (1.0 - cfg.plateau_rel)) {
            best = total;
            best_epoch = epoch;
        }
        if (epoch - best_epoch >= cfg.plateau_epochs) break;
    }

    res.loss_history.resize(static_cast<Eigen::Index>(history.size()), 3);
    for (size_t i = 0; i < history.size(); ++i)
        res.loss_history.row(static_cast<Eigen::Index>(i)) = history[i].transpose();

    if (cfg.train_estimator) {
        MlpTrainConfig reg;
        reg.hidden = cfg.hidden;
        reg.lr = cfg.lr_behavior;
        reg.epochs = cfg.epochs;
        reg.plateau_epochs = cfg.plateau_epochs;
        reg.seed = cfg.seed ^ 0xe57;
        reg.standardize = false; // both sides already live in trained scales
        Eigen::MatrixXd nu_eff = w.encoder.forward(x).leftCols(cfg.d_eff);
        w.estimator = mlp_train_regression(y, nu_eff, reg).net;
    }
    return res;
}

Eigen::MatrixXd encoder_input_jacobian(const CaeWeights& w, const Eigen::VectorXd& p_natural,
                                       bool natural_units) {
    Eigen::MatrixXd j = w.encoder.input_jacobian(w.in_scaler.apply_row(p_natural));
    if (natural_units) j.array().rowwise() /= w.in_scaler.std.transpose().array();
    return j;
}

Eigen::VectorXd conformality_residual(const CaeWeights& w, const Eigen::MatrixXd& points) {
    const int m = w.encoder.out_dim();
    const Eigen::Index n_pairs = m * (m - 1) / 2;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_pairs);
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        Eigen::MatrixXd j = encoder_input_jacobian(w, points.row(r).transpose(), false);
        Eigen::Index p = 0;
        for (int i = 0; i < m; ++i)
            for (int k = i + 1; k < m; ++k) {
                double dot = j.row(i).dot(j.row(k));
                acc[p++] += dot * dot;
            }
    }
    return acc / static_cast<double>(points.rows());
}

LevelSetTrace trace_level_set(const CaeWeights& w, ModelId model,
                              const Eigen::VectorXd& initial_state, const ObservableSpec& obs,
                              const Eigen::VectorXd& nu_meaningful,
                              const Eigen::MatrixXd& redundant_grid,
                              const Eigen::VectorXd& reference_behavior,
                              const IntegratorOptions& iopts) {
    const int m = w.encoder.out_dim();
    require(nu_meaningful.size() == w.d_eff, ErrorCode::dimension_mismatch,
            "meaningful latent vector must have length d_eff");
    require(redundant_grid.cols() == m - w.d_eff, ErrorCode::dimension_mismatch,
            "redundant grid width must be m - d_eff");

    LevelSetTrace tr;
    tr.redundant_grid = redundant_grid;
    const Eigen::Index g = redundant_grid.rows();
    Eigen::MatrixXd latents(g, m);
    for (Eigen::Index i = 0; i < g; ++i) {
        latents.row(i).head(w.d_eff) = nu_meaningful.transpose();
        latents.row(i).tail(m - w.d_eff) = redundant_grid.row(i);
    }
    tr.decoded_params = w.decode(latents);
    tr.valid.assign(static_cast<size_t>(g), true);
    tr.simulated = Eigen::MatrixXd::Zero(g, reference_behavior.size());
    tr.deviation.resize(g);
    const double ref_norm = reference_behavior.norm();
    for (Eigen::Index i = 0; i < g; ++i) {
        Eigen::VectorXd p = tr.decoded_params.row(i).transpose();
        if ((p.array() <= 0.0).any()) {
            tr.valid[static_cast<size_t>(i)] = false;
            tr.deviation[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        try {
            Eigen::VectorXd y = simulate_observation(model, p, initial_state, obs, iopts);
            tr.simulated.row(i) = y.transpose();
            tr.deviation[i] = (y - reference_behavior).norm() / ref_norm;
        } catch (const Error&) {
            tr.valid[static_cast<size_t>(i)] = false;
            tr.deviation[i] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return tr;
}

// ---------------------------------------------------------------- persistence

namespace {

void write_net(std::ostream& os, const Mlp& net) {
    for (int l = 0; l < net.n_layers(); ++l) {
        write_matrix_blob(os, net.weights[static_cast<size_t>(l)]);
        write_matrix_blob(os, net.biases[static_cast<size_t>(l)]);
    }
}

Mlp read_net(std::istream& is, const std::vector<int>& dims) {
    Mlp net;
    for (size_t l = 1; l < dims.size(); ++l) {
        net.weights.push_back(read_matrix_blob(is, dims[l], dims[l - 1]));
        net.biases.push_back(read_matrix_blob(is, dims[l], 1));
    }
    return net;
}

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

} // namespace

void CaeWeights::save(const std::string& stem) const {
    std::filesystem::create_directories(std::filesystem::path(stem).parent_path());
    nlohmann::json j = {
        {"d_eff", d_eff},
        {"encoder_dims", encoder.layer_dims()},
        {"decoder_dims", decoder.layer_dims()},
        {"behavior_dims", behavior.layer_dims()},
        {"has_estimator", estimator.has_value()},
        {"in_mean", jvec(in_scaler.mean)},
        {"in_std", jvec(in_scaler.std)},
        {"out_mean", jvec(out_scaler.mean)},
        {"out_std", jvec(out_scaler.std)},
        {"layout", "encoder, decoder, behavior[, estimator]; per layer W then b; row-major f64le"},
    };
    if (estimator) j["estimator_dims"] = estimator->layer_dims();
    write_text_file(stem + ".json", j.dump(2) + "\n");
    std::ofstream os(stem + ".bin", std::ios::binary);
    require(os.good(), ErrorCode::io_error, "cannot open " + stem + ".bin");
    write_net(os, encoder);
    write_net(os, decoder);
    write_net(os, behavior);
    if (estimator) write_net(os, *estimator);
}

CaeWeights CaeWeights::load(const std::string& stem) {
    auto j = nlohmann::json::parse(read_text_file(stem + ".json"));
    CaeWeights w;
    w.d_eff = j["d_eff"].get<int>();
    w.in_scaler.mean = jvec_load(j["in_mean"]);
    w.in_scaler.std = jvec_load(j["in_std"]);
    w.out_scaler.mean = jvec_load(j["out_mean"]);
    w.out_scaler.std = jvec_load(j["out_std"]);
    std::ifstream is(stem + ".bin", std::ios::binary);
    require(is.good(), ErrorCode::io_error, "cannot open " + stem + ".bin");
    w.encoder = read_net(is, j["encoder_dims"].get<std::vector<int>>());
    w.decoder = read_net(is, j["decoder_dims"].get<std::vector<int>>());
    w.behavior = read_net(is, j["behavior_dims"].get<std::vector<int>>());
    if (j["has_estimator"].get<bool>())
        w.estimator = read_net(is, j["estimator_dims"].get<std::vector<int>>());
    return w;
}

} // namespace effdim
