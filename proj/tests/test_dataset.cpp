#include "effdim/dataset.hpp"
#include "effdim/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace effdim;

namespace {

const Eigen::VectorXd& msp_base() { return model_info(ModelId::msp_full).base_point; }

// Kolmogorov-Smirnov statistic against U(lo, hi).
double ks_uniform(std::vector<double> xs, double lo, double hi) {
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    const double n = static_cast<double>(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        double cdf = (xs[i] - lo) / (hi - lo);
        d = std::max(d, std::abs((i + 1) / n - cdf));
        d = std::max(d, std::abs(cdf - i / n));
    }
    return d;
}

} // namespace

TEST_CASE("sample_parameters: zero fraction pins every row to the base point") {
    SamplingPlan plan{msp_base(), SamplingMode::uniform_fraction, 0.0, 7, 11};
    Eigen::MatrixXd s = sample_parameters(plan);
    REQUIRE(s.rows() == 7);
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        CHECK((s.row(i).transpose() - msp_base()).norm() == 0.0);
}

TEST_CASE("sample_parameters: +-10 percent band is respected and filled") {
    SamplingPlan plan{msp_base(), SamplingMode::uniform_fraction, 0.1, 10000, 5};
    Eigen::MatrixXd s = sample_parameters(plan);
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        double lo = s.col(j).minCoeff(), hi = s.col(j).maxCoeff();
        CHECK(lo >= 0.9 * msp_base()[j]);
        CHECK(hi <= 1.1 * msp_base()[j]);
        // with 10k draws the empirical range should nearly fill the band
        CHECK(lo <= 0.905 * msp_base()[j]);
        CHECK(hi >= 1.095 * msp_base()[j]);
    }
}

TEST_CASE("sample_parameters: log-uniform sampling passes a KS test") {
    Eigen::VectorXd base = Eigen::VectorXd::Constant(2, 3.7);
    SamplingPlan plan{base, SamplingMode::log_uniform_range, 3.0, 1000, 99};
    Eigen::MatrixXd s = sample_parameters(plan);
    for (Eigen::Index j = 0; j < 2; ++j) {
        std::vector<double> logs;
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            logs.push_back(std::log10(s(i, j) / base[j]));
        CHECK(ks_uniform(logs, -3.0, 3.0) < 0.05);
    }
}

TEST_CASE("sample_parameters: bit-identical for identical plans") {
    SamplingPlan plan{msp_base(), SamplingMode::log_uniform_range, 2.0, 64, 123};
    CHECK(sample_parameters(plan) == sample_parameters(plan));
    plan.seed = 124;
    CHECK(sample_parameters(plan) != sample_parameters(SamplingPlan{
              msp_base(), SamplingMode::log_uniform_range, 2.0, 64, 123}));
}

TEST_CASE("sample_parameters: invalid plans rejected") {
    CHECK_THROWS_AS(sample_parameters(
                        SamplingPlan{msp_base(), SamplingMode::uniform_fraction, 1.5, 10, 0}),
                    Error);
    CHECK_THROWS_AS(
        sample_parameters(SamplingPlan{msp_base(), SamplingMode::uniform_fraction, 0.1, 0, 0}),
        Error);
    CHECK_THROWS_AS(sample_parameters(
                        SamplingPlan{msp_base(), SamplingMode::log_uniform_range, -1.0, 10, 0}),
                    Error);
}

TEST_CASE("transient dataset: single row at the base point reproduces the reference") {
    const auto& info = model_info(ModelId::compartmental_2);
    ObservableSpec obs{0, info.default_obs_times};
    SamplingPlan plan{info.base_point, SamplingMode::uniform_fraction, 0.0, 1, 0};
    Dataset ds = build_transient_dataset(ModelId::compartmental_2, plan, info.reference_ic, obs);
    REQUIRE(ds.rows() == 1);
    Eigen::VectorXd ref =
        simulate_observation(ModelId::compartmental_2, info.base_point, info.reference_ic, obs);
    CHECK((ds.outputs.row(0).transpose() - ref).norm() == 0.0);
}

TEST_CASE("transient dataset: toy model shapes match the experiment description") {
    const auto& info = model_info(ModelId::toy_enzyme);
    ObservableSpec obs{info.default_observable_state, info.default_obs_times};
    SamplingPlan plan{info.base_point, SamplingMode::uniform_fraction, 0.2, 50, 21};
    TransientDatasetOptions opts;
    opts.integrator.method = OdeMethod::stiff_extrap;
    Dataset ds = build_transient_dataset(ModelId::toy_enzyme, plan, info.reference_ic, obs, opts);
    CHECK(ds.inputs.rows() == 50);
    CHECK(ds.inputs.cols() == 3);
    CHECK(ds.outputs.cols() == 5);
    CHECK(ds.meta["model"] == "toy_enzyme");
    CHECK(ds.meta["seed"] == 21);
}

TEST_CASE("dataset save/load round trip") {
    const auto& info = model_info(ModelId::compartmental_2);
    ObservableSpec obs{0, info.default_obs_times};
    SamplingPlan plan{info.base_point, SamplingMode::uniform_fraction, 0.05, 4, 3};
    Dataset ds = build_transient_dataset(ModelId::compartmental_2, plan, info.reference_ic, obs);
    auto dir = (std::filesystem::temp_directory_path() / "effdim_test_ds").string();
    ds.save(dir);
    Dataset back = Dataset::load(dir);
    CHECK(back.inputs == ds.inputs);
    CHECK(back.outputs == ds.outputs);
    CHECK(back.meta["model"] == "compartmental_2");
}

TEST_CASE("fit_to_reference: starting at the generator converges immediately") {
    const auto& info = model_info(ModelId::compartmental_2);
    ObservableSpec obs{0, info.default_obs_times};
    FitOptions opts;
    opts.integrator.rtol = 1e-11;
    opts.integrator.atol = 1e-13;
    Eigen::VectorXd ref =
        simulate_observation(ModelId::compartmental_2, info.base_point, info.reference_ic, obs,
                             opts.integrator);
    FitResult fit = fit_to_reference(ModelId::compartmental_2, ref, info.base_point,
                                     info.reference_ic, obs, opts);
    CHECK(fit.converged);
    CHECK(fit.objective_value < 1e-18);
    CHECK(fit.iterations <= 2);
}

TEST_CASE("fit_to_reference: compartmental minimizers land on the level set") {
    const auto& info = model_info(ModelId::compartmental_2);
    ObservableSpec obs{0, info.default_obs_times};
    FitOptions opts;
    opts.integrator.rtol = 1e-11;
    opts.integrator.atol = 1e-13;
    Eigen::VectorXd ref = simulate_observation(ModelId::compartmental_2, info.base_point,
                                               info.reference_ic, obs, opts.integrator);
    Eigen::VectorXd beta_ref =
        analytic_effective_params(ModelId::compartmental_2, info.base_point, 0.0);

    SamplingPlan starts{info.base_point, SamplingMode::uniform_fraction, 0.25, 40, 17};
    Eigen::MatrixXd s = sample_parameters(starts);
    int converged = 0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        Eigen::VectorXd start = s.row(i).transpose();
        FitResult fit =
            fit_to_reference(ModelId::compartmental_2, ref, start, info.reference_ic, obs, opts);
        // every converged fit beats its start and sits on the level set
        Eigen::VectorXd y_start = simulate_observation(ModelId::compartmental_2, start,
                                                       info.reference_ic, obs, opts.integrator);
        double g_start = (y_start - ref).squaredNorm();
        if (!fit.converged) continue;
        ++converged;
        CHECK(fit.objective_value <= g_start);
        CHECK(fit.objective_value < 1e-10);
        Eigen::VectorXd beta =
            analytic_effective_params(ModelId::compartmental_2, fit.argmin, 0.0);
        for (int k = 0; k < 3; ++k)
            CHECK(std::abs(beta[k] - beta_ref[k]) / std::abs(beta_ref[k]) < 1e-4);
        Eigen::VectorXd y_fit = simulate_observation(ModelId::compartmental_2, fit.argmin,
                                                     info.reference_ic, obs, opts.integrator);
        CHECK((y_fit - ref).norm() < 1e-4);
    }
    CHECK(converged >= 36); // expect nearly all to converge on this model
}

TEST_CASE("optimization dataset: records convergence metadata") {
    const auto& info = model_info(ModelId::compartmental_2);
    ObservableSpec obs{0, info.default_obs_times};
    OptimizationDatasetOptions opts;
    opts.fit.integrator.rtol = 1e-11;
    opts.fit.integrator.atol = 1e-13;
    Eigen::VectorXd ref = simulate_observation(ModelId::compartmental_2, info.base_point,
                                               info.reference_ic, obs, opts.fit.integrator);
    SamplingPlan starts{info.base_point, SamplingMode::uniform_fraction, 0.25, 1, 29};
    Dataset ds = build_optimization_dataset(ModelId::compartmental_2, ref, 30, starts,
                                            info.reference_ic, obs, opts);
    CHECK(ds.rows() >= 15);
    CHECK(ds.inputs.cols() == 4);
    CHECK(ds.meta["convergence_rate"].get<double>() >= 0.5);
    // level-set property of every kept row
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
        CHECK((ds.outputs.row(i).transpose() - ref).norm() < 1e-4);
}

TEST_CASE("optimization dataset: single start at the base point gives one row") {
    const auto& info = model_info(ModelId::compartmental_2);
    ObservableSpec obs{0, info.default_obs_times};
    OptimizationDatasetOptions opts;
    opts.fit.integrator.rtol = 1e-11;
    opts.fit.integrator.atol = 1e-13;
    Eigen::VectorXd ref = simulate_observation(ModelId::compartmental_2, info.base_point,
                                               info.reference_ic, obs, opts.fit.integrator);
    SamplingPlan starts{info.base_point, SamplingMode::uniform_fraction, 0.0, 1, 0};
    Dataset ds = build_optimization_dataset(ModelId::compartmental_2, ref, 1, starts,
                                            info.reference_ic, obs, opts);
    REQUIRE(ds.rows() == 1);
    CHECK((ds.inputs.row(0).transpose() - info.base_point).norm() / info.base_point.norm() <
          1e-6);
}
