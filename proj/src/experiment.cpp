#include "effdim/experiment.hpp"

#include "effdim/conformal_ae.hpp"
#include "effdim/csv.hpp"
#include "effdim/dataset.hpp"
#include "effdim/dmaps.hpp"
#include "effdim/errors.hpp"
#include "effdim/extension.hpp"
#include "effdim/identifiability.hpp"
#include "effdim/jsf.hpp"
#include "effdim/mlp.hpp"
#include "effdim/models.hpp"
#include "effdim/stats.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace effdim {

namespace fs = std::filesystem;

namespace {

// ------------------------------------------------------------ small utilities

std::string iso_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::uint64_t file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

double diameter(const Eigen::MatrixXd& x) {
    // bounding-box diagonal; cheap and monotone with the true diameter
    Eigen::VectorXd lo = x.colwise().minCoeff(), hi = x.colwise().maxCoeff();
    return (hi - lo).norm();
}

Eigen::VectorXd col_of(const Eigen::MatrixXd& m, int j) { return m.col(j); }

// Tracks stages, artifacts, checks and wall time for the manifest.
class StageRunner {
  public:
    StageRunner(const ExperimentConfig& cfg) : cfg_(cfg) {
        fs::create_directories(cfg.out_dir);
        doc_["experiment"] = cfg.experiment;
        doc_["seed"] = cfg.seed;
        doc_["out_dir"] = cfg.out_dir;
        doc_["created_at"] = iso_now();
        nlohmann::json resolved;
        for (const auto& [k, v] : cfg_.overrides) resolved[k] = v;
        doc_["config"] = resolved;
        doc_["stages"] = nlohmann::json::array();
    }

    void begin(const std::string& name) {
        current_ = {{"name", name},
                    {"artifacts", nlohmann::json::array()},
                    {"checks", nlohmann::json::array()}};
        t0_ = std::chrono::steady_clock::now();
    }

    void artifact(const std::string& path) {
        if (fs::is_directory(path)) {
            for (const auto& e : fs::directory_iterator(path))
                if (e.is_regular_file())
                    current_["artifacts"].push_back(
                        {{"path", e.path().string()},
                         {"fnv1a64", file_hash(e.path().string())}});
        } else {
            current_["artifacts"].push_back({{"path", path}, {"fnv1a64", file_hash(path)}});
        }
    }

    /// Scale-dependent assertions are recorded but skipped when the run is
    /// configured far below its intended scale (smoke runs).
    void set_underpowered(bool flag) { underpowered_ = flag; }
    bool underpowered() const { return underpowered_; }

    bool check(const std::string& name, double value, const std::string& op, double threshold) {
        bool passed = false;
        if (op == ">=") passed = value >= threshold;
        else if (op == "<=") passed = value <= threshold;
        else if (op == ">") passed = value > threshold;
        else if (op == "<") passed = value < threshold;
        else if (op == "==") passed = value == threshold;
        else fail(ErrorCode::invalid_argument, "unknown check op " + op);
        current_["checks"].push_back({{"name", name},
                                      {"value", value},
                                      {"op", op},
                                      {"threshold", threshold},
                                      {"passed", passed},
                                      {"skipped_underpowered", underpowered_}});
        return passed;
    }

    void note(const std::string& key, const nlohmann::json& value) { current_[key] = value; }

    void end() {
        current_["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        doc_["stages"].push_back(current_);
        // keep a partial manifest on disk so failed runs record their progress
        RunManifest partial;
        partial.doc = doc_;
        partial.save(cfg_.out_dir);
    }

    RunManifest finish() {
        doc_["finished_at"] = iso_now();
        RunManifest m;
        m.doc = doc_;
        m.save(cfg_.out_dir);
        return m;
    }

    const ExperimentConfig& cfg() const { return cfg_; }
    std::string dir(const std::string& sub) const { return cfg_.out_dir + "/" + sub; }

  private:
    ExperimentConfig cfg_;
    nlohmann::json doc_;
    nlohmann::json current_;
    std::chrono::steady_clock::time_point t0_;
    bool underpowered_ = false;
};

// Shared artifact cache (sibling directory of the experiment out_dirs), so
// pipelines that need the same expensive dataset or embedding reuse it.
std::string shared_cache_dir(const ExperimentConfig& cfg, const std::string& key) {
    fs::path parent = fs::path(cfg.out_dir).parent_path();
    if (parent.empty()) parent = ".";
    return (parent / "shared" / key).string();
}

bool dir_exists(const std::string& d) { return fs::exists(fs::path(d) / ".complete"); }

void mark_complete(const std::string& d) { write_text_file(d + "/.complete", iso_now() + "\n"); }

// ------------------------------------------------------------ model shorthand

struct MspSetup {
    ModelId model = ModelId::msp_full;
    Eigen::VectorXd base, ic;
    ObservableSpec obs;
    IntegratorOptions integ;
    double etot = 0.66;
};

MspSetup msp_setup() {
    MspSetup s;
    const auto& info = model_info(ModelId::msp_full);
    s.base = info.base_point;
    s.ic = info.reference_ic;
    s.obs = {info.default_observable_state, info.default_obs_times};
    s.integ.method = OdeMethod::stiff_extrap;
    return s;
}

struct ToySetup {
    ModelId model = ModelId::toy_enzyme;
    Eigen::VectorXd base, ic;
    ObservableSpec obs;
    IntegratorOptions integ;
    double etot = 0.66;
};

ToySetup toy_setup(bool regime_k1) {
    ToySetup s;
    const auto& info = model_info(ModelId::toy_enzyme);
    s.base = info.base_point;
    if (regime_k1) s.base << 0.71, 19.0, 6700.0;
    s.ic = info.reference_ic;
    s.obs = {info.default_observable_state, info.default_obs_times};
    s.integ.method = OdeMethod::stiff_extrap;
    return s;
}

// Cached transient dataset builder.
Dataset cached_transient(const ExperimentConfig& cfg, const std::string& key, ModelId model,
                         const SamplingPlan& plan, const Eigen::VectorXd& ic,
                         const ObservableSpec& obs, const IntegratorOptions& integ) {
    std::string dir = shared_cache_dir(cfg, key);
    if (dir_exists(dir)) {
        Dataset ds = Dataset::load(dir);
        if (ds.meta.value("seed", std::uint64_t(0)) == plan.seed &&
            ds.meta.value("count", -1) == plan.count)
            return ds;
    }
    TransientDatasetOptions opts;
    opts.integrator = integ;
    Dataset ds = build_transient_dataset(model, plan, ic, obs, opts);
    ds.meta["count"] = plan.count;
    ds.save(dir);
    mark_complete(dir);
    return ds;
}

// ------------------------------------------------------------- plot emitters

void emit_gnuplot_parity(const std::string& dir, const std::string& name,
                         const std::string& csv_rel, int n_components) {
    std::ostringstream os;
    os << "# gnuplot script; run from this directory\n"
       << "set datafile separator ','\n"
       << "set key left top\n"
       << "set size square\n";
    for (int c = 0; c < n_components; ++c) {
        os << "set terminal pngcairo size 640,640\nset output '" << name << "_" << c
           << ".png'\n"
           << "set xlabel 'true'\nset ylabel 'predicted'\n"
           << "plot '" << csv_rel << "' using " << (2 * c + 1) << ":" << (2 * c + 2)
           << " with points pt 7 ps 0.3 title 'component " << c
           << "', x with lines lt -1 notitle\n";
    }
    write_text_file(dir + "/" + name + ".gp", os.str());
}

void emit_gnuplot_histogram(const std::string& dir, const std::string& name,
                            const std::string& csv_rel) {
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set terminal pngcairo size 800,500\nset output '" << name << ".png'\n"
       << "set style fill solid 0.6\nset boxwidth 0.9 relative\n"
       << "plot '" << csv_rel << "' using 1:2 with boxes title 'count'\n";
    write_text_file(dir + "/" + name + ".gp", os.str());
}

void write_histogram_csv(const std::string& path, const Eigen::VectorXd& values, int bins) {
    double lo = values.minCoeff(), hi = values.maxCoeff();
    if (hi <= lo) hi = lo + 1e-12;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(bins, 2);
    for (int b = 0; b < bins; ++b) h(b, 0) = lo + (b + 0.5) * (hi - lo) / bins;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        int b = std::min<int>(bins - 1, static_cast<int>((values[i] - lo) / (hi - lo) * bins));
        h(b, 1) += 1.0;
    }
    write_csv(path, h, {"bin_center", "count"});
}

// =========================================================== msp experiments

void run_msp_dimension_count(StageRunner& run) {
    const auto& cfg = run.cfg();
    MspSetup msp = msp_setup();
    const int count = cfg.get_int("count", 10000);
    const double fraction = cfg.get_double("fraction", 0.1);
    run.set_underpowered(count < 5000 || cfg.get_int("fit.n_starts", 1000) < 500);

    run.begin("transient_dataset");
    SamplingPlan plan{msp.base, SamplingMode::uniform_fraction, fraction, count, cfg.seed};
    Dataset ds = cached_transient(cfg, "msp_transient_" + std::to_string(cfg.seed) + "_" +
                                           std::to_string(count),
                                  msp.model, plan, msp.ic, msp.obs, msp.integ);
    ds.save(run.dir("transient_dataset"));
    run.artifact(run.dir("transient_dataset"));
    run.check("dataset_rows", static_cast<double>(ds.rows()), ">=", 0.99 * count);
    run.end();

    run.begin("output_informed_dmaps");
    KernelSpec spec{KernelVariant::output_informed, cfg.get_double("dmaps.epsilon", 0.5),
                    cfg.get_double("dmaps.c_exponent", 4.0)};
    double alpha = cfg.get_double("dmaps.alpha", 1.0);
    int k = cfg.get_int("dmaps.k", 10);
    Embedding emb = dmaps_fit(&ds.inputs, &ds.outputs, spec, alpha, k);
    SelectOptions sopts;
    sopts.r_cutoff = cfg.get_double("select.r_cutoff", 0.2);
    select_nonharmonic(emb, sopts);
    emb.save(run.dir("embedding"));
    run.artifact(run.dir("embedding"));
    run.check("nonharmonic_count", static_cast<double>(emb.nonharmonic.size()), "==", 3.0);
    double min_sel = 1e300, max_rej = 0.0;
    for (int j = 1; j < emb.residuals.size(); ++j) {
        bool sel = std::find(emb.nonharmonic.begin(), emb.nonharmonic.end(), j) !=
                   emb.nonharmonic.end();
        if (sel)
            min_sel = std::min(min_sel, emb.residuals[j]);
        else
            max_rej = std::max(max_rej, emb.residuals[j]);
    }
    double gap = max_rej > 0 ? min_sel / max_rej : 1e300;
    run.check("residual_gap", gap, ">=", 3.0);
    run.note("residuals", std::vector<double>(emb.residuals.data(),
                                              emb.residuals.data() + emb.residuals.size()));
    run.end();

    run.begin("optimization_dataset");
    Eigen::VectorXd reference =
        simulate_observation(msp.model, msp.base, msp.ic, msp.obs, msp.integ);
    OptimizationDatasetOptions oopts;
    oopts.fit.integrator = msp.integ;
    oopts.fit.solver.max_iterations = cfg.get_int("fit.max_iterations", 150);
    oopts.fit.solver.gradient_tol = cfg.get_double("fit.gradient_tol", 1e-8);
    SamplingPlan starts{msp.base, SamplingMode::log_uniform_range,
                        cfg.get_double("fit.decades", 3.0), 1,
                        Rng(cfg.seed, "opt_starts").next_u64()};
    int n_starts = cfg.get_int("fit.n_starts", 1000);
    Dataset opt = build_optimization_dataset(msp.model, reference, n_starts, starts, msp.ic,
                                             msp.obs, oopts);
    opt.save(run.dir("optimization_dataset"));
    run.artifact(run.dir("optimization_dataset"));
    run.check("converged_minimizers", static_cast<double>(opt.rows()), ">=", 500.0);
    run.end();

    run.begin("optimization_dimension");
    Eigen::MatrixXd logmin = opt.inputs.array().log10();
    auto p = pca(logmin, true);
    double top3 = p.explained_variance_ratio.head(3).sum();
    run.check("pca_top3_ratio", top3, ">=", 0.98);
    {
        Eigen::MatrixXd evr(p.explained_variance_ratio.size(), 1);
        evr.col(0) = p.explained_variance_ratio;
        write_csv(run.dir("optimization_pca.csv"), evr, {"explained_variance_ratio"});
        run.artifact(run.dir("optimization_pca.csv"));
    }
    KernelSpec ospec{KernelVariant::plain_input,
                     epsilon_heuristic(logmin) / cfg.get_double("dmaps.epsilon_divisor", 10.0)};
    Embedding oemb = dmaps_fit(&logmin, nullptr, ospec, 1.0, cfg.get_int("dmaps.k", 10) - 2);
    select_nonharmonic(oemb, sopts);
    oemb.save(run.dir("optimization_embedding"));
    run.artifact(run.dir("optimization_embedding"));
    run.check("optimization_dim", static_cast<double>(oemb.nonharmonic.size()), "==", 3.0);
    run.check("complementarity",
              static_cast<double>(emb.nonharmonic.size() + oemb.nonharmonic.size()), "==", 6.0);
    run.end();
}

// Builds (or loads) the plain-output embedding of the MSP transient data and
// the Double-DMaps GH map phi -> kappa used by both the bijection audit and
// the parameter-estimation pipeline.
struct MspKappaModel {
    Embedding embedding;
    DoubleDmapsModel gh;
    Eigen::MatrixXd kappa; // per transient row
    Dataset dataset;
};

MspKappaModel msp_kappa_model(StageRunner& run) {
    const auto& cfg = run.cfg();
    MspSetup msp = msp_setup();
    const int count = cfg.get_int("count", 10000);
    run.set_underpowered(count < 5000);

    run.begin("transient_dataset");
    SamplingPlan plan{msp.base, SamplingMode::uniform_fraction, cfg.get_double("fraction", 0.1),
                      count, cfg.seed};
    Dataset ds = cached_transient(cfg, "msp_transient_" + std::to_string(cfg.seed) + "_" +
                                           std::to_string(count),
                                  msp.model, plan, msp.ic, msp.obs, msp.integ);
    run.check("dataset_rows", static_cast<double>(ds.rows()), ">=", 0.99 * count);
    run.end();

    MspKappaModel m;
    m.dataset = ds;
    m.kappa.resize(ds.rows(), 3);
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
        m.kappa.row(i) =
            analytic_effective_params(msp.model, ds.inputs.row(i).transpose(), msp.etot)
                .transpose();

    run.begin("behavior_embedding");
    std::string cache = shared_cache_dir(cfg, "msp_behavior_embedding_" +
                                                  std::to_string(cfg.seed) + "_" +
                                                  std::to_string(count));
    double div = cfg.get_double("dmaps.epsilon_divisor", 1.0);
    if (dir_exists(cache)) {
        m.embedding = Embedding::load(cache);
    } else {
        KernelSpec spec{KernelVariant::plain_output,
                        cfg.get_double("dmaps.epsilon", 0.0) > 0
                            ? cfg.get_double("dmaps.epsilon", 0.0)
                            : epsilon_heuristic(ds.outputs) / div};
        m.embedding = dmaps_fit(nullptr, &ds.outputs, spec, 1.0, cfg.get_int("dmaps.k", 10));
        SelectOptions sopts;
        sopts.r_cutoff = cfg.get_double("select.r_cutoff", 0.2);
        select_nonharmonic(m.embedding, sopts);
        m.embedding.save(cache);
        mark_complete(cache);
    }
    m.embedding.save(run.dir("behavior_embedding"));
    run.artifact(run.dir("behavior_embedding"));
    run.check("behavior_nonharmonic_count", static_cast<double>(m.embedding.nonharmonic.size()),
              "==", 3.0);
    run.end();

    run.begin("double_dmaps_kappa_fit");
    const int n_train = cfg.get_int("count", 10000) * 7 / 10;
    Eigen::MatrixXd coords = m.embedding.selected_coords();
    Eigen::MatrixXd train_coords = coords.topRows(n_train);
    Eigen::MatrixXd train_kappa = m.kappa.topRows(n_train);
    GhOptions gh;
    gh.delta = cfg.get_double("gh.delta", 1e-10);
    gh.epsilon = cfg.get_double("gh.epsilon_scale", 16.0) * epsilon_heuristic(train_coords);
    Embedding train_view = m.embedding; // selected columns drive the fit
    m.gh.source_columns = m.embedding.nonharmonic;
    m.gh.inner = gh_fit(train_coords, train_kappa, gh);
    m.gh.save(run.dir("gh_kappa/gh_model"));
    run.artifact(run.dir("gh_kappa"));
    run.end();
    (void)train_view;
    return m;
}

void run_msp_phi_to_kappa(StageRunner& run) {
    const auto& cfg = run.cfg();
    MspKappaModel m = msp_kappa_model(run);
    const Eigen::Index n = m.dataset.rows();
    const Eigen::Index n_train = n * 7 / 10;

    run.begin("kappa_test_error");
    Eigen::MatrixXd coords = m.embedding.selected_coords();
    Eigen::MatrixXd pred = gh_eval_batch(m.gh.inner, coords);
    const char* names[3] = {"kappa1", "kappa2", "pi"};
    // pinned: within 10x of the reported mean absolute percentage errors
    const double limits[3] = {10 * 3.2e-3, 10 * 1.5e-4, 10 * 6.2e-3};
    Eigen::MatrixXd parity(n - n_train, 6);
    for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd t = m.kappa.col(c).tail(n - n_train);
        Eigen::VectorXd q = pred.col(c).tail(n - n_train);
        run.check(std::string("test_mape_percent_") + names[c], mape_percent(q, t), "<=",
                  limits[c]);
        parity.col(2 * c) = t;
        parity.col(2 * c + 1) = q;
    }
    write_csv(run.dir("kappa_parity_test.csv"), parity);
    run.artifact(run.dir("kappa_parity_test.csv"));
    emit_gnuplot_parity(cfg.out_dir, "kappa_parity", "kappa_parity_test.csv", 3);
    run.end();

    run.begin("invertibility_audit");
    auto rep = jacobian_determinants(m.gh.inner, coords, false);
    run.check("determinants_single_signed", rep.sign_consistent ? 1.0 : 0.0, "==", 1.0);
    run.check("min_abs_determinant", rep.min_abs_det, ">", 0.0);
    write_histogram_csv(run.dir("determinant_histogram.csv"), rep.determinants, 60);
    run.artifact(run.dir("determinant_histogram.csv"));
    emit_gnuplot_histogram(cfg.out_dir, "determinant_histogram", "determinant_histogram.csv");
    double out_tol = 1e-4 * diameter(pred);
    double in_tol = 1e-2 * diameter(coords);
    auto violations = injectivity_scan(coords, pred, out_tol, in_tol);
    run.check("injectivity_violations", static_cast<double>(violations.size()), "==", 0.0);
    run.end();
}

void run_msp_behavior_prediction(StageRunner& run) {
    const auto& cfg = run.cfg();
    run.set_underpowered(cfg.get_int("count", 5000) < 2000);
    MspSetup msp = msp_setup();
    const auto& red = model_info(ModelId::msp_reduced);
    Eigen::VectorXd kappa_base = analytic_effective_params(msp.model, msp.base, msp.etot);

    run.begin("kappa_dataset");
    const int count = cfg.get_int("count", 5000);
    SamplingPlan plan{kappa_base, SamplingMode::uniform_fraction,
                      cfg.get_double("fraction", 0.2), count, Rng(cfg.seed, "kappa").next_u64()};
    TransientDatasetOptions topts; // reduced model is linear and non-stiff
    Dataset ds = build_transient_dataset(ModelId::msp_reduced, plan, red.reference_ic,
                                         {2, red.default_obs_times}, topts);
    ds.save(run.dir("kappa_dataset"));
    run.artifact(run.dir("kappa_dataset"));
    run.end();

    run.begin("kappa_embedding");
    const Eigen::Index n_train = count * 4 / 5;
    Eigen::MatrixXd train_in = ds.inputs.topRows(n_train);
    Eigen::MatrixXd train_out = ds.outputs.topRows(n_train);
    KernelSpec spec{KernelVariant::plain_input,
                    epsilon_heuristic(train_in) / cfg.get_double("dmaps.epsilon_divisor", 1.0)};
    Embedding emb = dmaps_fit(&train_in, nullptr, spec, 1.0, cfg.get_int("dmaps.k", 8));
    SelectOptions sopts;
    sopts.r_cutoff = cfg.get_double("select.r_cutoff", 0.2);
    select_nonharmonic(emb, sopts);
    emb.save(run.dir("kappa_embedding"));
    run.artifact(run.dir("kappa_embedding"));
    run.check("kappa_nonharmonic_count", static_cast<double>(emb.nonharmonic.size()), "==", 3.0);
    run.end();

    run.begin("profile_gh_fit_and_test");
    GhOptions gh;
    gh.delta = cfg.get_double("gh.delta", 1e-10);
    gh.epsilon =
        cfg.get_double("gh.epsilon_scale", 16.0) * epsilon_heuristic(emb.selected_coords());
    DoubleDmapsModel model = double_dmaps_fit(emb, train_out, gh);
    model.save(run.dir("gh_profile/gh_model"));
    run.artifact(run.dir("gh_profile"));

    // restrict the held-out kappa triples and predict their profiles
    const int t10_index = 4; // t = 10 in {2,4,...,20}
    double worst = 0.0;
    Eigen::MatrixXd parity(count - n_train, 2);
    for (Eigen::Index i = n_train; i < count; ++i) {
        Eigen::VectorXd x = ds.inputs.row(i).transpose();
        Eigen::VectorXd phi_all = nystrom_extend(emb, &x, nullptr);
        Eigen::VectorXd phi(emb.nonharmonic.size());
        for (size_t j = 0; j < emb.nonharmonic.size(); ++j)
            phi[static_cast<Eigen::Index>(j)] = phi_all[emb.nonharmonic[j]];
        Eigen::VectorXd prof = double_dmaps_eval(model, phi);
        double truth = ds.outputs(i, t10_index);
        worst = std::max(worst, std::abs(prof[t10_index] - truth) / truth);
        parity(i - n_train, 0) = truth;
        parity(i - n_train, 1) = prof[t10_index];
    }
    write_csv(run.dir("s2_t10_parity.csv"), parity, {"true", "predicted"});
    run.artifact(run.dir("s2_t10_parity.csv"));
    emit_gnuplot_parity(cfg.out_dir, "s2_t10_parity", "s2_t10_parity.csv", 1);
    run.check("worst_relative_error_t10", worst, "<=", 0.005);
    run.end();
}

void run_msp_parameter_estimation(StageRunner& run) {
    const auto& cfg = run.cfg();
    MspSetup msp = msp_setup();
    MspKappaModel m = msp_kappa_model(run);

    run.begin("unseen_behaviors");
    const int n_unseen = cfg.get_int("test_count", 100);
    SamplingPlan plan{msp.base, SamplingMode::uniform_fraction, cfg.get_double("fraction", 0.1),
                      n_unseen, Rng(cfg.seed, "unseen").next_u64()};
    Eigen::MatrixXd p_new = sample_parameters(plan);
    Eigen::MatrixXd behaviors(n_unseen, msp.obs.sample_times.size());
    Eigen::MatrixXd kappa_true(n_unseen, 3);
    for (int i = 0; i < n_unseen; ++i) {
        behaviors.row(i) =
            simulate_observation(msp.model, p_new.row(i).transpose(), msp.ic, msp.obs, msp.integ)
                .transpose();
        kappa_true.row(i) =
            analytic_effective_params(msp.model, p_new.row(i).transpose(), msp.etot).transpose();
    }
    run.end();

    run.begin("nystrom_estimation");
    Eigen::MatrixXd kappa_hat(n_unseen, 3);
    for (int i = 0; i < n_unseen; ++i) {
        Eigen::VectorXd y = behaviors.row(i).transpose();
        Eigen::VectorXd phi_all = nystrom_extend(m.embedding, nullptr, &y);
        Eigen::VectorXd phi(m.embedding.nonharmonic.size());
        for (size_t j = 0; j < m.embedding.nonharmonic.size(); ++j)
            phi[static_cast<Eigen::Index>(j)] = phi_all[m.embedding.nonharmonic[j]];
        kappa_hat.row(i) = gh_eval(m.gh.inner, phi).transpose();
    }
    const char* names[3] = {"kappa1", "kappa2", "pi"};
    const double limits[3] = {10 * 3.0e-3, 10 * 2.6e-4, 10 * 6.6e-3};
    Eigen::MatrixXd parity(n_unseen, 6);
    for (int c = 0; c < 3; ++c) {
        run.check(std::string("estimation_mape_percent_") + names[c],
                  mape_percent(kappa_hat.col(c), kappa_true.col(c)), "<=", limits[c]);
        parity.col(2 * c) = kappa_true.col(c);
        parity.col(2 * c + 1) = kappa_hat.col(c);
    }
    write_csv(run.dir("estimation_parity.csv"), parity);
    run.artifact(run.dir("estimation_parity.csv"));
    emit_gnuplot_parity(cfg.out_dir, "estimation_parity", "estimation_parity.csv", 3);
    run.end();
}

// =========================================================== toy experiments

struct ToyPipelineResult {
    Dataset dataset;
    Embedding embedding;
    CaeWeights cae;
    Eigen::VectorXd keff;
};

ToyPipelineResult toy_pipeline(StageRunner& run, bool regime_k1, const std::string& prefix) {
    const auto& cfg = run.cfg();
    ToySetup toy = toy_setup(regime_k1);
    const int count = cfg.get_int("count", 2000);
    run.set_underpowered(run.underpowered() || count < 1000);

    run.begin(prefix + "dataset");
    SamplingPlan plan{toy.base, SamplingMode::uniform_fraction, cfg.get_double("fraction", 0.2),
                      count, Rng(cfg.seed, prefix + "toy").next_u64()};
    TransientDatasetOptions topts;
    topts.integrator = toy.integ;
    Dataset ds = build_transient_dataset(toy.model, plan, toy.ic, toy.obs, topts);
    ds.save(run.dir(prefix + "dataset"));
    run.artifact(run.dir(prefix + "dataset"));
    run.end();

    ToyPipelineResult res;
    res.dataset = ds;
    res.keff.resize(ds.rows());
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
        res.keff[i] =
            analytic_effective_params(toy.model, ds.inputs.row(i).transpose(), toy.etot)[0];

    run.begin(prefix + "dmaps");
    KernelSpec spec{KernelVariant::output_informed, cfg.get_double("dmaps.epsilon", 0.5),
                    cfg.get_double("dmaps.c_exponent", 4.0)};
    res.embedding = dmaps_fit(&ds.inputs, &ds.outputs, spec, 1.0, cfg.get_int("dmaps.k", 8));
    SelectOptions sopts;
    sopts.r_cutoff = cfg.get_double("select.r_cutoff", 0.2);
    select_nonharmonic(res.embedding, sopts);
    res.embedding.save(run.dir(prefix + "embedding"));
    run.artifact(run.dir(prefix + "embedding"));
    run.check(prefix + "nonharmonic_count",
              static_cast<double>(res.embedding.nonharmonic.size()), "==", 1.0);
    double rho_phi = spearman_rho(res.embedding.eigenvectors.col(res.embedding.nonharmonic[0]),
                                  res.keff);
    run.note("rho_phi1_keff", std::abs(rho_phi));
    run.end();

    run.begin(prefix + "cae_train");
    CaeConfig cc;
    cc.d_eff = 1;
    cc.alpha_ortho = cfg.get_double("cae.alpha_ortho", 33.0);
    cc.lr_encoder = cc.lr_decoder = cc.lr_behavior = cfg.get_double("cae.lr", 1e-3);
    cc.epochs = cfg.get_int("cae.epochs", 20000);
    cc.plateau_epochs = cfg.get_int("cae.plateau", 2000);
    cc.seed = cfg.seed + static_cast<std::uint64_t>(cfg.get_int("cae.seed_offset", 0));
    const Eigen::Index n_train = ds.rows() * 4 / 5;
    auto trained = train_conformal_ae(ds.inputs.topRows(n_train), ds.outputs.topRows(n_train),
                                      cc);
    res.cae = trained.weights;
    res.cae.save(run.dir(prefix + "cae/cae"));
    write_csv(run.dir(prefix + "cae/loss_history.csv"), trained.loss_history,
              {"reconstruction_mse", "conformality", "behavior_mse"});
    run.artifact(run.dir(prefix + "cae"));
    run.end();
    return res;
}

void run_toy_cae_levelsets(StageRunner& run) {
    const auto& cfg = run.cfg();

    // ------------------------------------------------ worked regime (kr ~ kcat)
    ToyPipelineResult k2 = toy_pipeline(run, false, "k2_");
    ToySetup toy = toy_setup(false);
    const Eigen::Index n = k2.dataset.rows();
    const Eigen::Index n_train = n * 4 / 5;

    run.begin("k2_latent_checks");
    Eigen::MatrixXd latents = k2.cae.encode(k2.dataset.inputs);
    double rho = spearman_rho(latents.col(0).tail(n - n_train), k2.keff.tail(n - n_train));
    run.check("nu1_vs_keff_spearman", std::abs(rho), ">", 0.99);
    Eigen::VectorXd resid = conformality_residual(k2.cae, k2.dataset.inputs);
    run.check("max_conformality_residual", resid.maxCoeff(), "<", 1e-2);
    run.end();

    run.begin("k2_disentanglement");
    MlpTrainConfig reg;
    reg.epochs = cfg.get_int("mlp.epochs", 6000);
    reg.plateau_epochs = cfg.get_int("mlp.plateau", 1500);
    reg.seed = cfg.seed + 5;
    Eigen::MatrixXd target = k2.dataset.outputs.rightCols(1); // final-time product level
    auto from_nu1 = mlp_train_regression(latents.leftCols(1).topRows(n_train),
                                         target.topRows(n_train), reg);
    auto from_rest = mlp_train_regression(latents.rightCols(2).topRows(n_train),
                                          target.topRows(n_train), reg);
    double r2_nu1 = r_squared(from_nu1.predict(latents.leftCols(1).bottomRows(n - n_train)),
                              target.bottomRows(n - n_train));
    double r2_rest = r_squared(from_rest.predict(latents.rightCols(2).bottomRows(n - n_train)),
                               target.bottomRows(n - n_train));
    run.check("r2_behavior_from_nu1", r2_nu1, ">", 0.98);
    run.check("r2_behavior_from_redundant", r2_rest, "<", 0.2);
    run.end();

    run.begin("k2_level_set_trace");
    Eigen::VectorXd ref_behavior =
        simulate_observation(toy.model, toy.base, toy.ic, toy.obs, toy.integ);
    Eigen::VectorXd nu_star = k2.cae.encode(toy.base.transpose()).row(0).transpose();
    // 20 x 20 grid inside the occupied latent range
    const int g = 20;
    Eigen::VectorXd lo(2), hi(2);
    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd col = latents.col(1 + c);
        std::sort(col.data(), col.data() + col.size());
        lo[c] = col[static_cast<Eigen::Index>(0.05 * (col.size() - 1))];
        hi[c] = col[static_cast<Eigen::Index>(0.95 * (col.size() - 1))];
    }
    Eigen::MatrixXd grid(g * g, 2);
    for (int a = 0; a < g; ++a)
        for (int b = 0; b < g; ++b)
            grid.row(a * g + b) << lo[0] + (hi[0] - lo[0]) * a / (g - 1),
                lo[1] + (hi[1] - lo[1]) * b / (g - 1);
    LevelSetTrace tr = trace_level_set(k2.cae, toy.model, toy.ic, toy.obs,
                                       nu_star.head(1), grid, ref_behavior, toy.integ);
    double worst = 0.0;
    int valid = 0;
    for (Eigen::Index i = 0; i < tr.deviation.size(); ++i) {
        if (!tr.valid[static_cast<size_t>(i)]) continue;
        ++valid;
        worst = std::max(worst, tr.deviation[i]);
    }
    run.check("level_set_valid_points", valid, ">=", 0.9 * g * g);
    run.check("level_set_worst_deviation", worst, "<=", 0.02);
    Eigen::MatrixXd trace_csv(g * g, 2 + 3 + 1);
    trace_csv.leftCols(2) = tr.redundant_grid;
    trace_csv.middleCols(2, 3) = tr.decoded_params;
    trace_csv.col(5) = tr.deviation;
    write_csv(run.dir("k2_level_set.csv"), trace_csv,
              {"nu2", "nu3", "kf", "kr", "kcat", "relative_deviation"});
    run.artifact(run.dir("k2_level_set.csv"));
    run.end();

    // ------------------------------------------ simpler regime (kr << kcat)
    ToyPipelineResult k1 = toy_pipeline(run, true, "k1_");
    ToySetup toy1 = toy_setup(true);

    run.begin("k1_regime_checks");
    double rho_kf = spearman_rho(
        k1.embedding.eigenvectors.col(k1.embedding.nonharmonic[0]), k1.dataset.inputs.col(0));
    run.check("phi1_vs_kf_spearman", std::abs(rho_kf), ">", 0.99);

    Eigen::VectorXd ref1 = simulate_observation(toy1.model, toy1.base, toy1.ic, toy1.obs,
                                                toy1.integ);
    Eigen::MatrixXd lat1 = k1.cae.encode(k1.dataset.inputs);
    Eigen::VectorXd nu1_star = k1.cae.encode(toy1.base.transpose()).row(0).transpose();
    const int g1 = 20;
    Eigen::VectorXd lo1(2), hi1(2);
    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd col = lat1.col(1 + c);
        std::sort(col.data(), col.data() + col.size());
        lo1[c] = col[static_cast<Eigen::Index>(0.05 * (col.size() - 1))];
        hi1[c] = col[static_cast<Eigen::Index>(0.95 * (col.size() - 1))];
    }
    Eigen::MatrixXd grid1(g1 * g1, 2);
    for (int a = 0; a < g1; ++a)
        for (int b = 0; b < g1; ++b)
            grid1.row(a * g1 + b) << lo1[0] + (hi1[0] - lo1[0]) * a / (g1 - 1),
                lo1[1] + (hi1[1] - lo1[1]) * b / (g1 - 1);
    LevelSetTrace tr1 = trace_level_set(k1.cae, toy1.model, toy1.ic, toy1.obs,
                                        nu1_star.head(1), grid1, ref1, toy1.integ);
    double kf_mean = 0, kf_sq = 0;
    int valid1 = 0;
    for (Eigen::Index i = 0; i < tr1.deviation.size(); ++i) {
        if (!tr1.valid[static_cast<size_t>(i)]) continue;
        ++valid1;
        kf_mean += tr1.decoded_params(i, 0);
        kf_sq += tr1.decoded_params(i, 0) * tr1.decoded_params(i, 0);
    }
    kf_mean /= valid1;
    double kf_cv = std::sqrt(std::max(0.0, kf_sq / valid1 - kf_mean * kf_mean)) / kf_mean;
    run.check("k1_level_set_valid_points", valid1, ">=", 0.9 * g1 * g1);
    run.check("k1_kf_coefficient_of_variation", kf_cv, "<", 0.02);
    run.end();
}

void run_toy_jsf(StageRunner& run) {
    const auto& cfg = run.cfg();
    ToySetup toy = toy_setup(false);
    const int count = cfg.get_int("count", 2000);
    run.set_underpowered(count < 1000);

    run.begin("delayed_observations");
    // 20 time-delayed snapshots of (S0, S1, ES0, E), stride = the two-second
    // sampling interval -> an 80-dimensional observation vector
    SamplingPlan plan{toy.base, SamplingMode::uniform_fraction, cfg.get_double("fraction", 0.2),
                      count, Rng(cfg.seed, "toyjsf").next_u64()};
    Eigen::MatrixXd params = sample_parameters(plan);
    Eigen::VectorXd grid(21);
    grid[0] = 0;
    for (int i = 1; i <= 20; ++i) grid[i] = 2.0 * i;
    Eigen::MatrixXd delays(count, 80);
    Eigen::VectorXd keff(count);
    const int species[4] = {0, 2, 1, 3}; // S0, S1, ES0, E
    for (int i = 0; i < count; ++i) {
        Trajectory traj =
            integrate(toy.model, params.row(i).transpose(), toy.ic, grid, toy.integ);
        for (int t = 0; t < 20; ++t)
            for (int s = 0; s < 4; ++s) delays(i, 4 * t + s) = traj.states(t + 1, species[s]);
        keff[i] = analytic_effective_params(toy.model, params.row(i).transpose(), toy.etot)[0];
    }
    // robustness stress: the latter half of the measurements replaced by
    // uniform noise over each component's observed range
    Rng noise(cfg.seed, "jsf_noise");
    for (int c = 40; c < 80; ++c) {
        double lo = delays.col(c).minCoeff(), hi = delays.col(c).maxCoeff();
        for (int i = 0; i < count; ++i) delays(i, c) = noise.uniform(lo, hi);
    }
    write_csv(run.dir("delays.csv"), delays);
    run.artifact(run.dir("delays.csv"));
    run.end();

    run.begin("jsf_extraction");
    JsfOptions jopts;
    jopts.d = cfg.get_int("jsf.d", 0);
    int m_fun = cfg.get_int("jsf.m", 25);
    JsfBasis basis = compute_jsf(delays, params, m_fun, jopts);
    basis.save(run.dir("jsf"));
    run.artifact(run.dir("jsf"));
    int f1 = first_nontrivial_column(basis.functions);
    double rho = spearman_rho(basis.functions.col(f1), keff);
    run.check("f1_vs_keff_spearman", std::abs(rho), ">", 0.98);
    run.end();

    run.begin("uncommon_vs_redundant_latents");
    auto un = uncommon_directions(delays, params, basis, cfg.get_int("jsf.r", 5 * m_fun), m_fun,
                                  jopts);
    {
        Eigen::MatrixXd sv(un.singular_values.size(), 1);
        sv.col(0) = un.singular_values;
        write_csv(run.dir("uncommon_survival.csv"), sv, {"survival"});
        run.artifact(run.dir("uncommon_survival.csv"));
    }
    // compare against the conformal autoencoder's redundant latents when that
    // experiment has already produced them in a sibling directory
    fs::path cae_stem = fs::path(run.cfg().out_dir).parent_path() / "toy_cae_levelsets" /
                        "k2_cae" / "cae";
    if (fs::exists(cae_stem.string() + ".json") && un.functions.cols() >= 2) {
        CaeWeights cae = CaeWeights::load(cae_stem.string());
        Eigen::MatrixXd latents = cae.encode(params);
        double best01 = std::max(std::abs(spearman_rho(un.functions.col(0), latents.col(1))),
                                 std::abs(spearman_rho(un.functions.col(0), latents.col(2))));
        double best11 = std::max(std::abs(spearman_rho(un.functions.col(1), latents.col(1))),
                                 std::abs(spearman_rho(un.functions.col(1), latents.col(2))));
        run.check("uncommon1_matches_a_redundant_latent", best01, ">", 0.6);
        run.check("uncommon2_matches_a_redundant_latent", best11, ">", 0.6);
    }
    run.end();
}

// ================================================== compartmental experiment

void run_compartmental_full(StageRunner& run) {
    const auto& cfg = run.cfg();
    run.set_underpowered(cfg.get_int("count", 5000) < 2500 ||
                         cfg.get_int("fit.n_starts", 5000) < 2500);
    const auto& info = model_info(ModelId::compartmental_2);
    ObservableSpec obs{0, info.default_obs_times};
    IntegratorOptions integ;
    integ.rtol = 1e-11;
    integ.atol = 1e-13;

    run.begin("datasets");
    const int count = cfg.get_int("count", 5000);
    const int test_count = cfg.get_int("test_count", 500);
    SamplingPlan plan{info.base_point, SamplingMode::uniform_fraction,
                      cfg.get_double("fraction", 0.1), count, Rng(cfg.seed, "cmp").next_u64()};
    TransientDatasetOptions topts;
    topts.integrator = integ;
    Dataset train = build_transient_dataset(ModelId::compartmental_2, plan, info.reference_ic,
                                            obs, topts);
    SamplingPlan tplan = plan;
    tplan.count = test_count;
    tplan.seed = Rng(cfg.seed, "cmp_test").next_u64();
    Dataset test = build_transient_dataset(ModelId::compartmental_2, tplan, info.reference_ic,
                                           obs, topts);
    train.save(run.dir("train_dataset"));
    test.save(run.dir("test_dataset"));
    run.artifact(run.dir("train_dataset"));
    run.artifact(run.dir("test_dataset"));
    run.end();

    run.begin("sensitivity_nullspace");
    NullspaceOptions nopts;
    nopts.integrator = integ;
    auto ns = sensitivity_nullspace(ModelId::compartmental_2, info.base_point,
                                    info.reference_ic, obs, nopts);
    run.check("nullspace_dim", static_cast<double>(ns.basis.cols()), "==", 1.0);
    {
        Eigen::MatrixXd sv(ns.singular_values.size(), 1);
        sv.col(0) = ns.singular_values;
        write_csv(run.dir("sensitivity_singular_values.csv"), sv, {"sigma"});
        run.artifact(run.dir("sensitivity_singular_values.csv"));
    }
    run.end();

    run.begin("optimization_level_set");
    Eigen::VectorXd reference = simulate_observation(ModelId::compartmental_2, info.base_point,
                                                     info.reference_ic, obs, integ);
    OptimizationDatasetOptions oopts;
    oopts.fit.integrator = integ;
    oopts.fit.solver.max_iterations = cfg.get_int("fit.max_iterations", 300);
    SamplingPlan starts{info.base_point, SamplingMode::uniform_fraction,
                        cfg.get_double("fit.fraction", 0.25), 1,
                        Rng(cfg.seed, "cmp_starts").next_u64()};
    const int n_starts = cfg.get_int("fit.n_starts", 5000);
    Dataset opt = build_optimization_dataset(ModelId::compartmental_2, reference, n_starts,
                                             starts, info.reference_ic, obs, oopts);
    opt.save(run.dir("optimization_dataset"));
    run.artifact(run.dir("optimization_dataset"));
    run.check("converged_fraction", opt.meta["convergence_rate"].get<double>(), ">=", 0.5);

    KernelSpec mspec{KernelVariant::plain_input,
                     epsilon_heuristic(opt.inputs) / cfg.get_double("dmaps.epsilon_divisor", 10.0)};
    Embedding memb = dmaps_fit(&opt.inputs, nullptr, mspec, 1.0, 8);
    SelectOptions sopts;
    sopts.r_cutoff = cfg.get_double("select.r_cutoff", 0.2);
    select_nonharmonic(memb, sopts);
    memb.save(run.dir("minimizer_embedding"));
    run.artifact(run.dir("minimizer_embedding"));
    run.check("minimizer_dim", static_cast<double>(memb.nonharmonic.size()), "==", 1.0);
    run.end();

    run.begin("behavior_embedding");
    KernelSpec bspec{KernelVariant::plain_output, epsilon_heuristic(train.outputs)};
    Embedding bemb = dmaps_fit(nullptr, &train.outputs, bspec, 1.0, cfg.get_int("dmaps.k", 12));
    select_nonharmonic(bemb, sopts);
    bemb.save(run.dir("behavior_embedding"));
    run.artifact(run.dir("behavior_embedding"));
    run.check("behavior_nonharmonic_count", static_cast<double>(bemb.nonharmonic.size()), "==",
              3.0);
    run.check("complementarity",
              static_cast<double>(bemb.nonharmonic.size() + memb.nonharmonic.size()), "==", 4.0);
    run.end();

    // analytic effective parameters per row
    auto betas = [&](const Dataset& ds) {
        Eigen::MatrixXd b(ds.rows(), 3);
        for (Eigen::Index i = 0; i < ds.rows(); ++i)
            b.row(i) = analytic_effective_params(ModelId::compartmental_2,
                                                 ds.inputs.row(i).transpose(), 0.0)
                           .transpose();
        return b;
    };
    Eigen::MatrixXd beta_train = betas(train), beta_test = betas(test);
    Eigen::MatrixXd phi_train = bemb.selected_coords();
    Eigen::MatrixXd phi_test = nystrom_extend_batch(bemb, nullptr, &test.outputs);
    Eigen::MatrixXd phi_test_sel(test.rows(), bemb.nonharmonic.size());
    for (size_t j = 0; j < bemb.nonharmonic.size(); ++j)
        phi_test_sel.col(static_cast<Eigen::Index>(j)) = phi_test.col(bemb.nonharmonic[j]);

    run.begin("gh_maps");
    GhOptions gh;
    gh.delta = cfg.get_double("gh.delta", 1e-10);
    gh.epsilon = cfg.get_double("gh.epsilon_scale", 16.0) * epsilon_heuristic(phi_train);
    DoubleDmapsModel beta_of_phi = double_dmaps_fit(bemb, beta_train, gh);
    beta_of_phi.save(run.dir("gh_beta_of_phi/gh_model"));
    GhOptions ghi;
    ghi.delta = gh.delta;
    ghi.epsilon = cfg.get_double("gh.epsilon_scale", 16.0) * epsilon_heuristic(beta_train);
    GhModel phi_of_beta = gh_fit(beta_train, phi_train, ghi);
    phi_of_beta.save(run.dir("gh_phi_of_beta/gh_model"));
    run.artifact(run.dir("gh_beta_of_phi"));
    run.artifact(run.dir("gh_phi_of_beta"));

    // pinned: within 10x of the reported root-mean-square prediction errors
    const double gh_beta_train_lim[3] = {10 * 1.10e-4, 10 * 5.26e-4, 10 * 4.02e-4};
    const double gh_beta_test_lim[3] = {10 * 1.87e-4, 10 * 9.44e-4, 10 * 7.04e-4};
    const double gh_phi_train_lim[3] = {10 * 1.17e-6, 10 * 1.61e-5, 10 * 7.14e-5};
    const double gh_phi_test_lim[3] = {10 * 1.62e-6, 10 * 2.36e-5, 10 * 9.22e-5};
    Eigen::MatrixXd bt_hat = gh_eval_batch(beta_of_phi.inner, phi_train);
    Eigen::MatrixXd bq_hat = gh_eval_batch(beta_of_phi.inner, phi_test_sel);
    Eigen::MatrixXd pt_hat = gh_eval_batch(phi_of_beta, beta_train);
    Eigen::MatrixXd pq_hat = gh_eval_batch(phi_of_beta, beta_test);
    for (int c = 0; c < 3; ++c) {
        run.check("gh_beta_train_rms_" + std::to_string(c + 1),
                  rmse(bt_hat.col(c), beta_train.col(c)), "<=", gh_beta_train_lim[c]);
        run.check("gh_beta_test_rms_" + std::to_string(c + 1),
                  rmse(bq_hat.col(c), beta_test.col(c)), "<=", gh_beta_test_lim[c]);
        run.check("gh_phi_train_rms_" + std::to_string(c + 1),
                  rmse(pt_hat.col(c), phi_train.col(c)), "<=", gh_phi_train_lim[c]);
        run.check("gh_phi_test_rms_" + std::to_string(c + 1),
                  rmse(pq_hat.col(c), phi_test_sel.col(c)), "<=", gh_phi_test_lim[c]);
    }
    run.end();

    run.begin("mlp_maps");
    MlpTrainConfig reg;
    reg.epochs = cfg.get_int("mlp.epochs", 12000);
    reg.plateau_epochs = cfg.get_int("mlp.plateau", 2000);
    reg.seed = cfg.seed + 11;
    auto nn_beta = mlp_train_regression(phi_train, beta_train, reg);
    reg.seed = cfg.seed + 12;
    auto nn_phi = mlp_train_regression(beta_train, phi_train, reg);
    const double nn_beta_train_lim[3] = {10 * 1.34e-4, 10 * 3.34e-4, 10 * 2.98e-4};
    const double nn_beta_test_lim[3] = {10 * 1.47e-4, 10 * 4.85e-4, 10 * 3.99e-4};
    const double nn_phi_train_lim[3] = {10 * 2.87e-5, 10 * 9.86e-5, 10 * 3.96e-4};
    const double nn_phi_test_lim[3] = {10 * 2.33e-5, 10 * 9.85e-5, 10 * 3.70e-4};
    Eigen::MatrixXd nbt = nn_beta.predict(phi_train), nbq = nn_beta.predict(phi_test_sel);
    Eigen::MatrixXd npt = nn_phi.predict(beta_train), npq = nn_phi.predict(beta_test);
    for (int c = 0; c < 3; ++c) {
        run.check("nn_beta_train_rms_" + std::to_string(c + 1),
                  rmse(nbt.col(c), beta_train.col(c)), "<=", nn_beta_train_lim[c]);
        run.check("nn_beta_test_rms_" + std::to_string(c + 1),
                  rmse(nbq.col(c), beta_test.col(c)), "<=", nn_beta_test_lim[c]);
        run.check("nn_phi_train_rms_" + std::to_string(c + 1),
                  rmse(npt.col(c), phi_train.col(c)), "<=", nn_phi_train_lim[c]);
        run.check("nn_phi_test_rms_" + std::to_string(c + 1),
                  rmse(npq.col(c), phi_test_sel.col(c)), "<=", nn_phi_test_lim[c]);
    }
    run.end();

    run.begin("cae_redundant_coordinate");
    CaeConfig cc;
    cc.d_eff = 3;
    cc.alpha_ortho = cfg.get_double("cae.alpha_ortho", 33.0);
    cc.lr_encoder = cc.lr_decoder = cc.lr_behavior = cfg.get_double("cae.lr", 1e-3);
    cc.epochs = cfg.get_int("cae.epochs", 8000);
    cc.plateau_epochs = cfg.get_int("cae.plateau", 1500);
    cc.seed = cfg.seed + static_cast<std::uint64_t>(cfg.get_int("cae.seed_offset", 0));
    int cae_count = cfg.get_int("cae.count", 3000);
    cae_count = std::min<int>(cae_count > 0 ? cae_count : train.rows(),
                              static_cast<int>(train.rows()));
    auto trained = train_conformal_ae(train.inputs.topRows(cae_count),
                                      train.outputs.topRows(cae_count), cc);
    trained.weights.save(run.dir("cae/cae"));
    write_csv(run.dir("cae/loss_history.csv"), trained.loss_history,
              {"reconstruction_mse", "conformality", "behavior_mse"});
    run.artifact(run.dir("cae"));
    // reconstruction parity on the held-out test points
    Eigen::MatrixXd rec = trained.weights.decode(trained.weights.encode(test.inputs));
    double rec_err = (rec - test.inputs).norm() / test.inputs.norm();
    run.check("cae_test_reconstruction_rel_error", rec_err, "<", 0.05);
    // the fourth conformal coordinate follows the optimization level set
    Eigen::MatrixXd min_latents = trained.weights.encode(opt.inputs);
    double rho = spearman_rho(min_latents.col(3),
                              memb.eigenvectors.col(memb.nonharmonic[0]));
    run.check("psi_c_vs_psi1_spearman", std::abs(rho), ">", 0.99);
    run.end();
}

// ======================================================= remaining pipelines

void run_effectiveness_factor(StageRunner& run) {
    const auto& cfg = run.cfg();
    run.set_underpowered(cfg.get_int("count", 3000) < 1500);

    run.begin("regime_checks");
    // asymptotic regimes, sampled well inside each region (the margins keep
    // every retained point at least 1.5 decades from the nearest boundary,
    // two decades for the eta ~ 1 region, where the pinned tolerances hold)
    double worst1 = 0, worst2 = 0, worst3 = 0;
    for (double lb = -4.0; lb <= 8.0; lb += 0.5) {
        double b = std::pow(10.0, lb);
        // regime 1: phi > max(sqrt(B), B), margin 10^1.5
        double phi1 = 31.6228 * std::max(std::sqrt(b), b);
        for (double m = 1.0; m <= 100.0; m *= 10) {
            double phi = phi1 * m;
            if (phi > 1e6) break;
            double eta = effectiveness_factor(phi, b);
            worst1 = std::max(worst1, std::abs(eta - b / (phi * phi)) / eta);
        }
        // regime 2: 1 < phi < B, margins 10^1.5 on both sides
        for (double phi = 31.6228; phi * 31.6228 <= b && phi <= 1e6; phi *= 10) {
            double eta = effectiveness_factor(phi, b);
            worst2 = std::max(worst2, std::abs(eta - 1.0 / phi) / eta);
        }
        // regime 3: phi < min(sqrt(B), 1), margin 10^2
        double phi3 = 0.01 * std::min(std::sqrt(b), 1.0);
        for (double m = 1.0; m >= 0.01; m /= 10) {
            double phi = phi3 * m;
            if (phi < 1e-8) break;
            worst3 = std::max(worst3, std::abs(effectiveness_factor(phi, b) - 1.0));
        }
    }
    run.check("regime1_worst_rel_error", worst1, "<", 0.05);
    run.check("regime2_worst_rel_error", worst2, "<", 0.05);
    run.check("regime3_worst_abs_error", worst3, "<", 1e-3);
    run.end();

    run.begin("cae_effective_parameter");
    const int count = cfg.get_int("count", 3000);
    // log-uniform box: phi in [1e-2, 1e6], B in [1e-4, 1e8]
    Rng rng(cfg.seed, "eta");
    Eigen::MatrixXd loginputs(count, 2);
    Eigen::VectorXd eta(count), logeta(count);
    for (int i = 0; i < count; ++i) {
        Rng row = rng.substream(static_cast<std::uint64_t>(i));
        double lphi = row.uniform(-2.0, 6.0);
        double lb = row.uniform(-4.0, 8.0);
        loginputs.row(i) << lphi, lb;
        eta[i] = effectiveness_factor(std::pow(10.0, lphi), std::pow(10.0, lb));
        logeta[i] = std::log10(eta[i]);
    }
    CaeConfig cc;
    cc.d_eff = 1;
    cc.alpha_ortho = cfg.get_double("cae.alpha_ortho", 33.0);
    cc.epochs = cfg.get_int("cae.epochs", 10000);
    cc.plateau_epochs = cfg.get_int("cae.plateau", 2000);
    cc.seed = cfg.seed + static_cast<std::uint64_t>(cfg.get_int("cae.seed_offset", 0));
    Eigen::MatrixXd target(count, 1);
    target.col(0) = logeta; // monotone transform keeps all regimes in the loss
    const int n_train = count * 4 / 5;
    auto trained = train_conformal_ae(loginputs.topRows(n_train), target.topRows(n_train), cc);
    trained.weights.save(run.dir("cae/cae"));
    run.artifact(run.dir("cae"));
    Eigen::MatrixXd latents = trained.weights.encode(loginputs);
    double rho = spearman_rho(latents.col(0).tail(count - n_train), eta.tail(count - n_train));
    run.check("nu1_vs_eta_spearman", std::abs(rho), ">", 0.99);
    Eigen::MatrixXd parity(count - n_train, 2);
    parity.col(0) = eta.tail(count - n_train);
    parity.col(1) = latents.col(0).tail(count - n_train);
    write_csv(run.dir("nu1_vs_eta.csv"), parity, {"eta", "nu1"});
    run.artifact(run.dir("nu1_vs_eta.csv"));
    run.end();
}

void run_spiral_jsf(StageRunner& run) {
    const auto& cfg = run.cfg();
    const int count = cfg.get_int("count", 2000);
    run.set_underpowered(count < 1000);

    run.begin("spiral_jsf");
    SpiralData s = generate_spiral(count, cfg.seed);
    JsfOptions jopts;
    jopts.d = cfg.get_int("jsf.d", 0);
    int m_fun = cfg.get_int("jsf.m", 25);
    JsfBasis basis = compute_jsf(s.set1, s.set2, m_fun, jopts);
    basis.save(run.dir("jsf"));
    run.artifact(run.dir("jsf"));
    int f1 = first_nontrivial_column(basis.functions);
    run.check("f1_vs_z_spearman", std::abs(spearman_rho(basis.functions.col(f1), s.z)), ">",
              0.98);
    run.end();

    run.begin("spiral_uncommon");
    auto un = uncommon_directions(s.set1, s.set2, basis, cfg.get_int("jsf.r", 5 * m_fun), m_fun,
                                  jopts);
    run.check("uncommon1_vs_c_spearman", std::abs(spearman_rho(un.functions.col(0), s.c)), ">",
              0.95);
    Eigen::MatrixXd table(count, 4);
    table.col(0) = s.z;
    table.col(1) = basis.functions.col(f1);
    table.col(2) = s.c;
    table.col(3) = un.functions.col(0);
    write_csv(run.dir("correlation_table.csv"), table, {"z", "f1", "c", "uncommon1"});
    run.artifact(run.dir("correlation_table.csv"));
    run.end();
}

} // namespace

// ----------------------------------------------------------------- interface

bool RunManifest::all_checks_passed() const {
    for (const auto& stage : doc.at("stages"))
        for (const auto& c : stage.at("checks")) {
            if (c.value("skipped_underpowered", false)) continue;
            if (!c.at("passed").get<bool>()) return false;
        }
    return true;
}

void RunManifest::save(const std::string& dir) const {
    fs::create_directories(dir);
    write_text_file(dir + "/manifest.json", doc.dump(2) + "\n");
}

RunManifest RunManifest::load(const std::string& dir) {
    RunManifest m;
    m.doc = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    return m;
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
    StageRunner run(cfg);
    if (cfg.experiment == "msp_dimension_count")
        run_msp_dimension_count(run);
    else if (cfg.experiment == "msp_phi_to_kappa")
        run_msp_phi_to_kappa(run);
    else if (cfg.experiment == "msp_behavior_prediction")
        run_msp_behavior_prediction(run);
    else if (cfg.experiment == "msp_parameter_estimation")
        run_msp_parameter_estimation(run);
    else if (cfg.experiment == "toy_cae_levelsets")
        run_toy_cae_levelsets(run);
    else if (cfg.experiment == "toy_jsf")
        run_toy_jsf(run);
    else if (cfg.experiment == "compartmental_full")
        run_compartmental_full(run);
    else if (cfg.experiment == "effectiveness_factor_regimes")
        run_effectiveness_factor(run);
    else if (cfg.experiment == "spiral_jsf")
        run_spiral_jsf(run);
    else
        fail(ErrorCode::config_error, "unknown experiment id: " + cfg.experiment);
    RunManifest manifest = run.finish();
    emit_report(manifest, cfg.out_dir);
    return manifest;
}

void emit_report(const RunManifest& manifest, const std::string& out_dir) {
    nlohmann::json summary;
    summary["experiment"] = manifest.doc.at("experiment");
    summary["seed"] = manifest.doc.at("seed");
    summary["all_checks_passed"] = manifest.all_checks_passed();
    nlohmann::json checks = nlohmann::json::array();
    std::ostringstream txt;
    txt << "experiment: " << manifest.doc.at("experiment").get<std::string>() << "\n";
    txt << "seed:       " << manifest.doc.at("seed") << "\n\n";
    txt << "  stage                          check                                    value"
           "        threshold  status\n";
    txt << "  ------------------------------ ---------------------------------------- "
           "------------ ---------- ------\n";
    for (const auto& stage : manifest.doc.at("stages")) {
        for (const auto& c : stage.at("checks")) {
            checks.push_back(c);
            const char* status = c.value("skipped_underpowered", false)
                                     ? "skip"
                                     : (c.at("passed").get<bool>() ? "pass" : "FAIL");
            char line[192];
            std::snprintf(line, sizeof line, "  %-30s %-40s %12.5g %1s%9.4g %s\n",
                          stage.at("name").get<std::string>().c_str(),
                          c.at("name").get<std::string>().c_str(),
                          c.at("value").get<double>(), c.at("op").get<std::string>().c_str(),
                          c.at("threshold").get<double>(), status);
            txt << line;
        }
    }
    summary["checks"] = checks;
    write_text_file(out_dir + "/report.json", summary.dump(2) + "\n");
    write_text_file(out_dir + "/report.txt", txt.str());
}

} // namespace effdim
