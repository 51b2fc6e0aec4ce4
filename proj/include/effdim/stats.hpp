#ifndef EFFDIM_STATS_HPP
#define EFFDIM_STATS_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace effdim {

/// Average ranks with midpoint tie handling.
inline Eigen::VectorXd ranks(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<Eigen::Index> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
    Eigen::VectorXd r(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && v[idx[static_cast<size_t>(j + 1)]] == v[idx[static_cast<size_t>(i)]])
            ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) r[idx[static_cast<size_t>(k)]] = avg;
        i = j + 1;
    }
    return r;
}

/// Spearman rank correlation (Pearson correlation of the rank vectors).
inline double spearman_rho(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd ra = ranks(a), rb = ranks(b);
    double ma = ra.mean(), mb = rb.mean();
    Eigen::ArrayXd da = ra.array() - ma, db = rb.array() - mb;
    double denom = std::sqrt(da.square().sum() * db.square().sum());
    return denom > 0 ? (da * db).sum() / denom : 0.0;
}

/// Coefficient of determination of predictions against the truth.
inline double r_squared(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
    double mean = truth.mean();
    double ss_tot = (truth.array() - mean).square().sum();
    double ss_res = (truth - predicted).squaredNorm();
    return ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
}

/// Mean absolute percentage error, in percent.
inline double mape_percent(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < truth.size(); ++i)
        acc += std::abs((predicted[i] - truth[i]) / truth[i]);
    return 100.0 * acc / static_cast<double>(truth.size());
}

/// Root mean square error.
inline double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
    return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(truth.size()));
}

} // namespace effdim

#endif
