#include "effdim/mlp.hpp"

#include "effdim/errors.hpp"

#include <cmath>

namespace effdim {

Mlp Mlp::create(const std::vector<int>& dims, Rng& rng) {
    require(dims.size() >= 2, ErrorCode::invalid_argument, "network needs at least one layer");
    Mlp net;
    for (size_t l = 1; l < dims.size(); ++l) {
        int fan_in = dims[l - 1], fan_out = dims[l];
        require(fan_in > 0 && fan_out > 0, ErrorCode::invalid_argument, "layer dims must be positive");
        double bound = std::sqrt(1.0 / fan_in);
        Eigen::MatrixXd w(fan_out, fan_in);
        Eigen::VectorXd b(fan_out);
        for (int i = 0; i < fan_out; ++i) {
            for (int j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-bound, bound);
            b[i] = rng.uniform(-bound, bound);
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

std::vector<int> Mlp::layer_dims() const {
    std::vector<int> d{in_dim()};
    for (const auto& w : weights) d.push_back(static_cast<int>(w.rows()));
    return d;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd a = x;
    for (int l = 0; l < n_layers(); ++l) {
        a = (a * weights[l].transpose()).rowwise() + biases[l].transpose();
        if (l + 1 < n_layers()) a = a.array().tanh();
    }
    return a;
}

std::vector<Eigen::MatrixXd> Mlp::forward_cached(const Eigen::MatrixXd& x) const {
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(weights.size() + 1);
    acts.push_back(x);
    for (int l = 0; l < n_layers(); ++l) {
        Eigen::MatrixXd z = (acts.back() * weights[l].transpose()).rowwise() +
                            biases[l].transpose();
        if (l + 1 < n_layers()) z = z.array().tanh();
        acts.push_back(std::move(z));
    }
    return acts;
}

Eigen::MatrixXd Mlp::input_jacobian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd j = weights[0]; // n_1 x n_0
    Eigen::VectorXd a = (weights[0] * x + biases[0]);
    for (int l = 1; l < n_layers(); ++l) {
        a = a.array().tanh();
        Eigen::VectorXd dp = 1.0 - a.array().square(); // tanh'(z) in terms of tanh(z)
        j = weights[l] * dp.asDiagonal() * j;
        a = weights[l] * a + biases[l];
    }
    return j;
}

void MlpGrads::init_like(const Mlp& net) {
    w.clear();
    b.clear();
    for (int l = 0; l < net.n_layers(); ++l) {
        w.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        b.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
}

void MlpGrads::zero() {
    for (auto& m : w) m.setZero();
    for (auto& v : b) v.setZero();
}

Eigen::MatrixXd mlp_backward(const Mlp& net, const std::vector<Eigen::MatrixXd>& acts,
                             const Eigen::MatrixXd& d_out, MlpGrads& grads,
                             const std::vector<Eigen::MatrixXd>* extra) {
    const int layers = net.n_layers();
    Eigen::MatrixXd da = d_out;
    for (int l = layers - 1; l >= 0; --l) {
        if (extra && l + 1 < layers && (*extra)[static_cast<size_t>(l + 1)].size() > 0)
            da += (*extra)[static_cast<size_t>(l + 1)];
        Eigen::MatrixXd dz;
        if (l + 1 == layers)
            dz = std::move(da);
        else
            dz = da.array() * (1.0 - acts[l + 1].array().square());
        grads.w[l].noalias() += dz.transpose() * acts[l];
        grads.b[l].noalias() += dz.colwise().sum().transpose();
        da = dz * net.weights[l];
    }
    return da;
}

void AdamState::init_like(const Mlp& net) {
    mw.clear();
    vw.clear();
    mb.clear();
    vb.clear();
    for (int l = 0; l < net.n_layers(); ++l) {
        mw.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        vw.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        mb.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        vb.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    t = 0;
}

void AdamState::step(Mlp& net, const MlpGrads& grads, double lr) {
    ++t;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (int l = 0; l < net.n_layers(); ++l) {
        mw[l] = beta1 * mw[l] + (1 - beta1) * grads.w[l];
        vw[l] = beta2 * vw[l].array() + (1 - beta2) * grads.w[l].array().square();
        net.weights[l].array() -=
            lr * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + eps);
        mb[l] = beta1 * mb[l] + (1 - beta1) * grads.b[l];
        vb[l] = beta2 * vb[l].array() + (1 - beta2) * grads.b[l].array().square();
        net.biases[l].array() -= lr * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + eps);
    }
}

Scaler Scaler::fit(const Eigen::MatrixXd& x) {
    Scaler s;
    s.mean = x.colwise().mean();
    s.std = ((x.rowwise() - s.mean.transpose()).array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < s.std.size(); ++j)
        if (s.std[j] < 1e-300) s.std[j] = 1.0;
    return s;
}

Eigen::MatrixXd Scaler::apply(const Eigen::MatrixXd& x) const {
    return ((x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array());
}

Eigen::VectorXd Scaler::apply_row(const Eigen::VectorXd& x) const {
    return ((x - mean).array() / std.array()).matrix();
}

Eigen::MatrixXd Scaler::invert(const Eigen::MatrixXd& x) const {
    return (x.array().rowwise() * std.transpose().array()).matrix().rowwise() + mean.transpose();
}

Eigen::VectorXd Scaler::invert_row(const Eigen::VectorXd& x) const {
    return (x.array() * std.array()).matrix() + mean;
}

Eigen::MatrixXd MlpRegressor::predict(const Eigen::MatrixXd& x) const {
    if (!standardized) return net.forward(x);
    return out_scaler.invert(net.forward(in_scaler.apply(x)));
}

Eigen::MatrixXd MlpRegressor::jacobian(const Eigen::VectorXd& x) const {
    if (!standardized) return net.input_jacobian(x);
    Eigen::MatrixXd j = net.input_jacobian(in_scaler.apply_row(x));
    j.array().colwise() *= out_scaler.std.array();
    j.array().rowwise() /= in_scaler.std.transpose().array();
    return j;
}

MlpRegressor mlp_train_regression(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                  const MlpTrainConfig& cfg) {
    require(inputs.rows() == targets.rows() && inputs.rows() >= 2, ErrorCode::invalid_argument,
            "regression needs matching, nonempty inputs/targets");
    MlpRegressor reg;
    reg.standardized = cfg.standardize;
    Eigen::MatrixXd x = inputs, y = targets;
    if (cfg.standardize) {
        reg.in_scaler = Scaler::fit(inputs);
        reg.out_scaler = Scaler::fit(targets);
        x = reg.in_scaler.apply(inputs);
        y = reg.out_scaler.apply(targets);
    }

    std::vector<int> dims{static_cast<int>(x.cols())};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(static_cast<int>(y.cols()));
    Rng rng(cfg.seed, "mlp_regression");
    reg.net = Mlp::create(dims, rng);

    AdamState adam;
    adam.init_like(reg.net);
    MlpGrads grads;
    grads.init_like(reg.net);

    const Eigen::Index n = x.rows();
    const int batch = cfg.batch > 0 ? std::min<int>(cfg.batch, static_cast<int>(n))
                                    : static_cast<int>(n);
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    Rng shuffle_rng = rng.substream("shuffle");
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (batch < n) {
            for (Eigen::Index i = n - 1; i > 0; --i) {
                auto j = static_cast<Eigen::Index>(shuffle_rng.next_u64() %
                                                   static_cast<std::uint64_t>(i + 1));
                std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
            }
        }
        double epoch_loss = 0.0;
        Eigen::Index done = 0;
        while (done < n) {
            Eigen::Index bs = std::min<Eigen::Index>(batch, n - done);
            Eigen::MatrixXd xb(bs, x.cols()), yb(bs, y.cols());
            if (batch < n) {
                for (Eigen::Index i = 0; i < bs; ++i) {
                    xb.row(i) = x.row(order[static_cast<size_t>(done + i)]);
                    yb.row(i) = y.row(order[static_cast<size_t>(done + i)]);
                }
            } else {
                xb = x;
                yb = y;
            }
            auto acts = reg.net.forward_cached(xb);
            Eigen::MatrixXd err = acts.back() - yb;
            double loss = err.squaredNorm() / static_cast<double>(err.size());
            require(std::isfinite(loss), ErrorCode::numeric_failure,
                    "regression training produced a non-finite loss");
            grads.zero();
            mlp_backward(reg.net, acts, (2.0 / static_cast<double>(err.size())) * err, grads);
            adam.step(reg.net, grads, cfg.lr);
            epoch_loss += loss * static_cast<double>(bs);
            done += bs;
        }
        epoch_loss /= static_cast<double>(n);
        reg.loss_history.push_back(epoch_loss);
        if (epoch_loss < best * (1.0 - cfg.plateau_rel)) {
            best = epoch_loss;
            best_epoch = epoch;
        }
        if (epoch - best_epoch >= cfg.plateau_epochs) break;
    }
    return reg;
}

} // namespace effdim
