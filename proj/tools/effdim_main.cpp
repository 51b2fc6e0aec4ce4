// effdim command-line pipeline. Links the public C API only.

#include <effdim.h>

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

namespace {

// 0 ok, 2 config/user error, 3 numeric failure
int exit_code_for(int status) {
    switch (status) {
    case EFFDIM_OK: return 0;
    case EFFDIM_ERR_INVALID_ARGUMENT:
    case EFFDIM_ERR_CONFIG:
    case EFFDIM_ERR_IO:
    case EFFDIM_ERR_UNSUPPORTED_MODEL: return 2;
    default: return 3;
    }
}

[[noreturn]] void die(int status) {
    std::fprintf(stderr, "error: %s\n", effdim_last_error());
    std::exit(exit_code_for(status));
}

void check(int status) {
    if (status != EFFDIM_OK) die(status);
}

// "2:2:20" (start:step:stop) or "2,4,6"
std::vector<double> parse_times(const std::string& spec) {
    std::vector<double> t;
    if (spec.find(':') != std::string::npos) {
        double a, s, b;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &a, &s, &b) != 3 || s <= 0) {
            std::fprintf(stderr, "error: bad time spec '%s' (want start:step:stop)\n",
                         spec.c_str());
            std::exit(2);
        }
        for (double x = a; x <= b + 1e-12 * s; x += s) t.push_back(x);
    } else {
        size_t pos = 0;
        while (pos < spec.size()) {
            size_t comma = spec.find(',', pos);
            t.push_back(std::stod(spec.substr(pos, comma - pos)));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (t.empty()) {
        std::fprintf(stderr, "error: empty time spec\n");
        std::exit(2);
    }
    return t;
}

struct Matrix {
    std::vector<double> data;
    int rows = 0, cols = 0;
    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
};

Matrix load_csv(const std::string& path) {
    Matrix m;
    double* raw = nullptr;
    check(effdim_read_matrix_csv(path.c_str(), &m.rows, &m.cols, &raw));
    m.data.assign(raw, raw + static_cast<size_t>(m.rows) * m.cols);
    effdim_free(raw);
    return m;
}

// Either a CSV path holding one row/column, or the literal "base".
std::vector<double> load_params(const std::string& src, const std::string& model) {
    int n_states = 0, n_params = 0;
    check(effdim_model_dims(model.c_str(), &n_states, &n_params));
    if (src == "base") {
        std::vector<double> p(static_cast<size_t>(n_params));
        check(effdim_model_base_point(model.c_str(), p.data()));
        return p;
    }
    Matrix m = load_csv(src);
    if (static_cast<int>(m.data.size()) != n_params) {
        std::fprintf(stderr, "error: %s holds %zu values, %s needs %d parameters\n",
                     src.c_str(), m.data.size(), model.c_str(), n_params);
        std::exit(2);
    }
    return m.data;
}

std::vector<double> load_ic(const std::string& src, const std::string& model) {
    int n_states = 0, n_params = 0;
    check(effdim_model_dims(model.c_str(), &n_states, &n_params));
    if (src == "reference") {
        std::vector<double> ic(static_cast<size_t>(n_states));
        check(effdim_model_reference_ic(model.c_str(), ic.data()));
        return ic;
    }
    Matrix m = load_csv(src);
    if (static_cast<int>(m.data.size()) != n_states) {
        std::fprintf(stderr, "error: %s holds %zu values, %s needs %d states\n", src.c_str(),
                     m.data.size(), model.c_str(), n_states);
        std::exit(2);
    }
    return m.data;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"effdim: data-driven discovery of effective parameter combinations"};
    app.require_subcommand(1);

    // ------------------------------------------------------------------ model
    auto* model_cmd = app.add_subcommand("model", "built-in parametric models");
    auto* model_list = model_cmd->add_subcommand("list", "list the model catalog");
    std::string m_model, m_params = "base", m_ic = "reference", m_times = "2:2:20", m_out;
    bool m_stiff = false;
    double m_rtol = 1e-8, m_atol = 1e-10;
    auto* model_sim = model_cmd->add_subcommand("simulate", "integrate a model");
    model_sim->add_option("--model", m_model, "model name")->required();
    model_sim->add_option("--params", m_params, "parameter CSV or 'base'");
    model_sim->add_option("--ic", m_ic, "initial-state CSV or 'reference'");
    model_sim->add_option("--times", m_times, "output grid start:step:stop or comma list");
    model_sim->add_option("--out", m_out, "trajectory CSV path")->required();
    model_sim->add_flag("--stiff", m_stiff, "use the linearly implicit integrator");
    model_sim->add_option("--rtol", m_rtol);
    model_sim->add_option("--atol", m_atol);

    // ----------------------------------------------------------------- sample
    auto* sample = app.add_subcommand("sample", "build a transient dataset");
    std::string s_model, s_base = "base", s_ic = "reference", s_times, s_out, s_mode = "uniform";
    int s_count = 1000, s_obs = -1;
    double s_fraction = 0.1;
    std::uint64_t s_seed = 42;
    bool s_stiff = false;
    sample->add_option("--model", s_model)->required();
    sample->add_option("--base", s_base, "base point CSV or 'base'");
    sample->add_option("--mode", s_mode, "uniform | log");
    sample->add_option("--fraction", s_fraction, "fraction (uniform) or decades (log)");
    sample->add_option("--count", s_count);
    sample->add_option("--seed", s_seed);
    sample->add_option("--ic", s_ic);
    sample->add_option("--observable-state", s_obs, "state index (-1: model default)");
    sample->add_option("--times", s_times, "observation times (default: model default)");
    sample->add_flag("--stiff", s_stiff);
    sample->add_option("--out", s_out, "dataset directory")->required();

    // -------------------------------------------------------------------- fit
    auto* fit = app.add_subcommand("fit", "build an optimization (level-set) dataset");
    std::string f_model, f_base = "base", f_ic = "reference", f_times, f_reference, f_out,
                f_mode = "log";
    int f_starts = 1000, f_obs = -1, f_maxit = 300;
    double f_fraction = 3.0, f_gtol = 1e-8;
    std::uint64_t f_seed = 42;
    bool f_stiff = false;
    fit->add_option("--model", f_model)->required();
    fit->add_option("--reference", f_reference, "reference behavior CSV (default: base point)");
    fit->add_option("--starts", f_starts);
    fit->add_option("--base", f_base);
    fit->add_option("--mode", f_mode, "uniform | log");
    fit->add_option("--fraction", f_fraction);
    fit->add_option("--seed", f_seed);
    fit->add_option("--ic", f_ic);
    fit->add_option("--observable-state", f_obs);
    fit->add_option("--times", f_times);
    fit->add_option("--max-iterations", f_maxit);
    fit->add_option("--gradient-tol", f_gtol);
    fit->add_flag("--stiff", f_stiff);
    fit->add_option("--out", f_out)->required();

    // ------------------------------------------------------------------ dmaps
    auto* dm = app.add_subcommand("dmaps", "spectral embedding of a dataset");
    std::string d_dataset, d_kernel = "plain_input", d_out;
    double d_eps = 0.0, d_alpha = 1.0, d_cutoff = 0.2, d_c = 4.0;
    int d_k = 10;
    dm->add_option("--dataset", d_dataset, "dataset directory")->required();
    dm->add_option("--kernel", d_kernel, "plain_input | plain_output | output_informed");
    dm->add_option("--epsilon", d_eps, "kernel scale (0: heuristic)");
    dm->add_option("--c-exponent", d_c);
    dm->add_option("--alpha", d_alpha, "density exponent, 0 or 1");
    dm->add_option("-k,--k", d_k, "nontrivial eigenvector count");
    dm->add_option("--cutoff", d_cutoff, "non-harmonic residual cutoff");
    dm->add_option("--out", d_out, "embedding directory")->required();

    // --------------------------------------------------------------------- gh
    auto* gh = app.add_subcommand("gh", "geometric harmonics");
    auto* gh_fit_cmd = gh->add_subcommand("fit", "fit an interpolant");
    std::string ghf_coords, ghf_values, ghf_out;
    double ghf_eps = 0.0, ghf_delta = 1e-6;
    gh_fit_cmd->add_option("--coords", ghf_coords)->required();
    gh_fit_cmd->add_option("--values", ghf_values)->required();
    gh_fit_cmd->add_option("--epsilon", ghf_eps);
    gh_fit_cmd->add_option("--delta", ghf_delta);
    gh_fit_cmd->add_option("--out", ghf_out, "model stem (writes .json/.bin)")->required();
    auto* gh_eval_cmd = gh->add_subcommand("eval", "evaluate at new coordinates");
    std::string ghe_model, ghe_coords, ghe_out;
    gh_eval_cmd->add_option("--gh-model", ghe_model)->required();
    gh_eval_cmd->add_option("--coords", ghe_coords)->required();
    gh_eval_cmd->add_option("--out", ghe_out)->required();
    auto* gh_grad_cmd = gh->add_subcommand("grad", "analytic jacobians at new coordinates");
    std::string ghg_model, ghg_coords, ghg_out;
    gh_grad_cmd->add_option("--gh-model", ghg_model)->required();
    gh_grad_cmd->add_option("--coords", ghg_coords)->required();
    gh_grad_cmd->add_option("--out", ghg_out, "one row per point, jacobian flattened row-major")
        ->required();

    // -------------------------------------------------------------------- cae
    auto* cae = app.add_subcommand("cae", "conformal autoencoder");
    auto* cae_train = cae->add_subcommand("train", "train on a dataset directory");
    std::string ct_dataset, ct_out;
    int ct_deff = 1, ct_epochs = 20000, ct_plateau = 2000;
    double ct_alpha = 33.0, ct_lr = 1e-3;
    std::uint64_t ct_seed = 0;
    cae_train->add_option("--dataset", ct_dataset)->required();
    cae_train->add_option("--d-eff", ct_deff)->required();
    cae_train->add_option("--alpha", ct_alpha, "conformality weight");
    cae_train->add_option("--lr", ct_lr);
    cae_train->add_option("--epochs", ct_epochs);
    cae_train->add_option("--plateau", ct_plateau);
    cae_train->add_option("--seed", ct_seed);
    cae_train->add_option("--out", ct_out, "weight stem (writes .json/.bin)")->required();
    auto* cae_encode = cae->add_subcommand("encode", "parameters -> latents");
    std::string ce_model, ce_in, ce_out;
    cae_encode->add_option("--cae-model", ce_model)->required();
    cae_encode->add_option("--in", ce_in)->required();
    cae_encode->add_option("--out", ce_out)->required();
    auto* cae_decode = cae->add_subcommand("decode", "latents -> parameters");
    std::string cd_model, cd_in, cd_out;
    cae_decode->add_option("--cae-model", cd_model)->required();
    cae_decode->add_option("--in", cd_in)->required();
    cae_decode->add_option("--out", cd_out)->required();
    auto* cae_level = cae->add_subcommand("levelset", "trace a level set of the latents");
    std::string cl_cae, cl_model, cl_ic = "reference", cl_times, cl_grid, cl_reference, cl_out;
    std::vector<double> cl_nu;
    int cl_obs = -1;
    bool cl_stiff = false;
    cae_level->add_option("--cae-model", cl_cae)->required();
    cae_level->add_option("--model", cl_model, "forward model for re-simulation")->required();
    cae_level->add_option("--nu", cl_nu, "meaningful latent value(s)")->required();
    cae_level->add_option("--grid", cl_grid, "CSV of redundant-latent grid rows")->required();
    cae_level->add_option("--reference", cl_reference, "reference behavior CSV")->required();
    cae_level->add_option("--ic", cl_ic);
    cae_level->add_option("--observable-state", cl_obs);
    cae_level->add_option("--times", cl_times);
    cae_level->add_flag("--stiff", cl_stiff);
    cae_level->add_option("--out", cl_out, "decoded parameters + deviation CSV")->required();

    // -------------------------------------------------------------------- jsf
    auto* jsf = app.add_subcommand("jsf", "jointly smooth functions");
    auto* jsf_compute = jsf->add_subcommand("compute", "extract common functions");
    std::string jc_set1, jc_set2, jc_out;
    int jc_m = 25, jc_d = 0;
    jsf_compute->add_option("--set1", jc_set1)->required();
    jsf_compute->add_option("--set2", jc_set2)->required();
    jsf_compute->add_option("-m,--functions", jc_m);
    jsf_compute->add_option("-d,--eigs", jc_d, "per-set eigenvector count (0: default)");
    jsf_compute->add_option("--out", jc_out, "basis directory")->required();
    auto* jsf_un = jsf->add_subcommand("uncommon", "extract set-specific directions");
    std::string ju_jsf, ju_set1, ju_set2, ju_out;
    int ju_r = 125, ju_m = 25;
    jsf_un->add_option("--jsf", ju_jsf, "basis directory from 'jsf compute'")->required();
    jsf_un->add_option("--set1", ju_set1)->required();
    jsf_un->add_option("--set2", ju_set2)->required();
    jsf_un->add_option("-r,--smooth", ju_r, "common-span harmonic count");
    jsf_un->add_option("-m,--functions", ju_m);
    jsf_un->add_option("--out", ju_out, "output directory")->required();
    auto* jsf_spiral = jsf->add_subcommand("spiral", "generate the worked spiral example");
    int js_n = 2000;
    std::uint64_t js_seed = 42;
    std::string js_out;
    jsf_spiral->add_option("-n,--count", js_n);
    jsf_spiral->add_option("--seed", js_seed);
    jsf_spiral->add_option("--out", js_out, "output directory")->required();

    // ------------------------------------------------------------------ audit
    auto* audit = app.add_subcommand("audit", "identifiability audits");
    auto* audit_inv = audit->add_subcommand("invertibility", "jacobian determinant audit");
    std::string ai_gh, ai_points, ai_out;
    bool ai_scale = false;
    audit_inv->add_option("--gh-model", ai_gh)->required();
    audit_inv->add_option("--points", ai_points)->required();
    audit_inv->add_flag("--scale-normalize", ai_scale);
    audit_inv->add_option("--out", ai_out, "determinant CSV")->required();
    auto* audit_null = audit->add_subcommand("nullspace", "sensitivity nullspace at a point");
    std::string an_model, an_point = "base", an_ic = "reference", an_times, an_out;
    int an_obs = -1;
    bool an_stiff = false;
    double an_step = 1e-5, an_thresh = 1e-6;
    audit_null->add_option("--model", an_model)->required();
    audit_null->add_option("--point", an_point);
    audit_null->add_option("--ic", an_ic);
    audit_null->add_option("--observable-state", an_obs);
    audit_null->add_option("--times", an_times);
    audit_null->add_option("--fd-step", an_step);
    audit_null->add_option("--rank-threshold", an_thresh);
    audit_null->add_flag("--stiff", an_stiff);
    audit_null->add_option("--out", an_out, "singular values + basis CSV")->required();

    // ------------------------------------------------------------- experiment
    auto* exp = app.add_subcommand("experiment", "configuration-driven pipelines");
    auto* exp_run = exp->add_subcommand("run", "run an experiment config");
    std::string er_config, er_out;
    exp_run->add_option("--config", er_config, "plain-text key = value file")->required();
    exp_run->add_option("--out", er_out, "override the configured output directory");

    // ----------------------------------------------------------------- report
    auto* report = app.add_subcommand("report", "re-render reports from a manifest");
    auto* report_emit = report->add_subcommand("emit", "write report files for a run");
    std::string re_dir;
    report_emit->add_option("--run", re_dir, "experiment output directory")->required();

    CLI11_PARSE(app, argc, argv);

    // ------------------------------------------------------------ dispatching
    if (*model_list) {
        int n = effdim_model_count();
        std::printf("%-22s %8s %8s  parameters\n", "model", "states", "params");
        for (int i = 0; i < n; ++i) {
            char name[64];
            check(effdim_model_name(i, name, sizeof name));
            int ns = 0, np = 0;
            check(effdim_model_dims(name, &ns, &np));
            std::printf("%-22s %8d %8d  ", name, ns, np);
            for (int j = 0; j < np; ++j) {
                char pn[32];
                check(effdim_model_param_name(name, j, pn, sizeof pn));
                std::printf("%s%s", j ? "," : "", pn);
            }
            std::printf("\n");
        }
        return 0;
    }

    if (*model_sim) {
        auto params = load_params(m_params, m_model);
        auto ic = load_ic(m_ic, m_model);
        auto times = parse_times(m_times);
        if (times.empty() || times.front() != 0.0) times.insert(times.begin(), 0.0);
        int ns = 0, np = 0;
        check(effdim_model_dims(m_model.c_str(), &ns, &np));
        std::vector<double> states(times.size() * static_cast<size_t>(ns));
        check(effdim_model_simulate(m_model.c_str(), params.data(), ic.data(), times.data(),
                                    static_cast<int>(times.size()), m_stiff ? 1 : 0, m_rtol,
                                    m_atol, states.data()));
        // header row: t,<state names>
        std::vector<double> table(times.size() * static_cast<size_t>(ns + 1));
        for (size_t i = 0; i < times.size(); ++i) {
            table[i * (ns + 1)] = times[i];
            for (int j = 0; j < ns; ++j) table[i * (ns + 1) + 1 + j] = states[i * ns + j];
        }
        // write with header via a small temp: reuse API writer then prepend? simpler:
        // write manually here
        FILE* fp = std::fopen(m_out.c_str(), "w");
        if (!fp) {
            std::fprintf(stderr, "error: cannot open %s\n", m_out.c_str());
            return 2;
        }
        std::fprintf(fp, "t");
        for (int j = 0; j < ns; ++j) {
            char sn[32];
            check(effdim_model_state_name(m_model.c_str(), j, sn, sizeof sn));
            std::fprintf(fp, ",%s", sn);
        }
        std::fprintf(fp, "\n");
        for (size_t i = 0; i < times.size(); ++i) {
            for (int j = 0; j <= ns; ++j)
                std::fprintf(fp, "%s%.17g", j ? "," : "", table[i * (ns + 1) + j]);
            std::fprintf(fp, "\n");
        }
        std::fclose(fp);
        return 0;
    }

    if (*sample) {
        auto base = load_params(s_base, s_model);
        auto ic = load_ic(s_ic, s_model);
        int ns = 0, np = 0;
        check(effdim_model_dims(s_model.c_str(), &ns, &np));
        std::vector<double> times;
        int obs_state = s_obs;
        if (s_times.empty() || obs_state < 0) {
            // model defaults: S2-style product observable on the default grid
            if (s_model == "msp_full" || s_model == "msp_reduced") {
                times = parse_times("2:2:20");
                if (obs_state < 0) obs_state = (s_model == "msp_full") ? 4 : 2;
            } else if (s_model == "toy_enzyme") {
                times = parse_times("2:2:10");
                if (obs_state < 0) obs_state = 2;
            } else if (s_model == "compartmental_2") {
                times = parse_times("0.5:0.5:5");
                if (obs_state < 0) obs_state = 0;
            } else {
                std::fprintf(stderr, "error: --times and --observable-state required\n");
                return 2;
            }
        }
        if (!s_times.empty()) times = parse_times(s_times);
        effdim_dataset* ds = nullptr;
        check(effdim_dataset_build_transient(
            s_model.c_str(), base.data(), s_mode == "log" ? 1 : 0, s_fraction, s_count, s_seed,
            ic.data(), obs_state, times.data(), static_cast<int>(times.size()),
            s_stiff ? 1 : 0, &ds));
        check(effdim_dataset_save(ds, s_out.c_str()));
        int rows = 0;
        effdim_dataset_shape(ds, &rows, nullptr, nullptr);
        std::printf("wrote %d rows to %s\n", rows, s_out.c_str());
        effdim_dataset_free(ds);
        return 0;
    }

    if (*fit) {
        auto base = load_params(f_base, f_model);
        auto ic = load_ic(f_ic, f_model);
        std::vector<double> times;
        int obs_state = f_obs;
        if (f_model == "msp_full") {
            times = parse_times(f_times.empty() ? "2:2:20" : f_times);
            if (obs_state < 0) obs_state = 4;
        } else if (f_model == "compartmental_2") {
            times = parse_times(f_times.empty() ? "0.5:0.5:5" : f_times);
            if (obs_state < 0) obs_state = 0;
        } else {
            if (f_times.empty() || f_obs < 0) {
                std::fprintf(stderr, "error: --times and --observable-state required\n");
                return 2;
            }
            times = parse_times(f_times);
        }
        std::vector<double> reference;
        if (f_reference.empty()) {
            reference.resize(times.size());
            std::vector<double> grid{0.0};
            grid.insert(grid.end(), times.begin(), times.end());
            int ns = 0, np = 0;
            check(effdim_model_dims(f_model.c_str(), &ns, &np));
            std::vector<double> states(grid.size() * static_cast<size_t>(ns));
            check(effdim_model_simulate(f_model.c_str(), base.data(), ic.data(), grid.data(),
                                        static_cast<int>(grid.size()), f_stiff ? 1 : 0, 1e-8,
                                        1e-10, states.data()));
            for (size_t i = 0; i < times.size(); ++i)
                reference[i] = states[(i + 1) * ns + obs_state];
        } else {
            reference = load_csv(f_reference).data;
        }
        effdim_dataset* ds = nullptr;
        check(effdim_dataset_build_optimization(
            f_model.c_str(), reference.data(), static_cast<int>(reference.size()), f_starts,
            base.data(), f_mode == "log" ? 1 : 0, f_fraction, f_seed, ic.data(), obs_state,
            times.data(), static_cast<int>(times.size()), f_stiff ? 1 : 0, f_maxit, f_gtol,
            &ds));
        check(effdim_dataset_save(ds, f_out.c_str()));
        int rows = 0;
        effdim_dataset_shape(ds, &rows, nullptr, nullptr);
        std::printf("converged minimizers: %d -> %s\n", rows, f_out.c_str());
        effdim_dataset_free(ds);
        return 0;
    }

    if (*dm) {
        effdim_dataset* ds = nullptr;
        check(effdim_dataset_load(d_dataset.c_str(), &ds));
        int rows = 0, in_cols = 0, out_cols = 0;
        effdim_dataset_shape(ds, &rows, &in_cols, &out_cols);
        std::vector<double> in(static_cast<size_t>(rows) * in_cols),
            out(static_cast<size_t>(rows) * out_cols);
        effdim_dataset_inputs(ds, in.data());
        effdim_dataset_outputs(ds, out.data());
        effdim_dataset_free(ds);
        const double* inp = d_kernel == "plain_output" ? nullptr : in.data();
        const double* outp = d_kernel == "plain_input" ? nullptr : out.data();
        effdim_embedding* emb = nullptr;
        check(effdim_dmaps_fit(inp, rows, in_cols, outp, out_cols, d_kernel.c_str(), d_eps, d_c,
                               d_alpha, d_k, d_cutoff, &emb));
        check(effdim_embedding_save(emb, d_out.c_str()));
        int count = 32;
        int idx[32];
        effdim_embedding_nonharmonic(emb, idx, &count);
        std::printf("non-harmonic coordinates (%d):", count);
        for (int i = 0; i < count && i < 32; ++i) std::printf(" %d", idx[i]);
        std::printf("\n");
        effdim_embedding_free(emb);
        return 0;
    }

    if (*gh_fit_cmd) {
        Matrix coords = load_csv(ghf_coords), values = load_csv(ghf_values);
        if (coords.rows != values.rows) {
            std::fprintf(stderr, "error: coords/values row mismatch\n");
            return 2;
        }
        effdim_gh* model = nullptr;
        check(effdim_gh_fit(coords.ptr(), coords.rows, coords.cols, values.ptr(), values.cols,
                            ghf_eps, ghf_delta, &model));
        check(effdim_gh_save(model, ghf_out.c_str()));
        int modes = 0;
        effdim_gh_dims(model, nullptr, nullptr, &modes);
        std::printf("retained %d modes -> %s.{json,bin}\n", modes, ghf_out.c_str());
        effdim_gh_free(model);
        return 0;
    }

    if (*gh_eval_cmd || *gh_grad_cmd) {
        bool grad = static_cast<bool>(*gh_grad_cmd);
        const std::string& stem = grad ? ghg_model : ghe_model;
        const std::string& coords_path = grad ? ghg_coords : ghe_coords;
        const std::string& out_path = grad ? ghg_out : ghe_out;
        effdim_gh* model = nullptr;
        check(effdim_gh_load(stem.c_str(), &model));
        int dim = 0, n_out = 0;
        effdim_gh_dims(model, &dim, &n_out, nullptr);
        Matrix coords = load_csv(coords_path);
        if (coords.cols != dim) {
            std::fprintf(stderr, "error: model expects %d coordinates\n", dim);
            return 2;
        }
        int width = grad ? n_out * dim : n_out;
        std::vector<double> result(static_cast<size_t>(coords.rows) * width);
        for (int i = 0; i < coords.rows; ++i) {
            if (grad)
                check(effdim_gh_gradient(model, coords.ptr() + static_cast<size_t>(i) * dim,
                                         result.data() + static_cast<size_t>(i) * width));
            else
                check(effdim_gh_eval(model, coords.ptr() + static_cast<size_t>(i) * dim,
                                     result.data() + static_cast<size_t>(i) * width));
        }
        check(effdim_write_matrix_csv(out_path.c_str(), result.data(), coords.rows, width));
        effdim_gh_free(model);
        return 0;
    }

    if (*cae_train) {
        effdim_dataset* ds = nullptr;
        check(effdim_dataset_load(ct_dataset.c_str(), &ds));
        int rows = 0, m = 0, n_obs = 0;
        effdim_dataset_shape(ds, &rows, &m, &n_obs);
        std::vector<double> in(static_cast<size_t>(rows) * m),
            out(static_cast<size_t>(rows) * n_obs);
        effdim_dataset_inputs(ds, in.data());
        effdim_dataset_outputs(ds, out.data());
        effdim_dataset_free(ds);
        effdim_cae* cae_model = nullptr;
        check(effdim_cae_train(in.data(), rows, m, out.data(), n_obs, ct_deff, ct_alpha, ct_lr,
                               ct_epochs, ct_plateau, ct_seed, &cae_model));
        check(effdim_cae_save(cae_model, ct_out.c_str()));
        std::printf("trained conformal autoencoder -> %s.{json,bin}\n", ct_out.c_str());
        effdim_cae_free(cae_model);
        return 0;
    }

    if (*cae_encode || *cae_decode) {
        bool enc = static_cast<bool>(*cae_encode);
        effdim_cae* cae_model = nullptr;
        check(effdim_cae_load((enc ? ce_model : cd_model).c_str(), &cae_model));
        int m = 0;
        effdim_cae_dims(cae_model, &m, nullptr, nullptr);
        Matrix in = load_csv(enc ? ce_in : cd_in);
        if (in.cols != m) {
            std::fprintf(stderr, "error: expected %d columns\n", m);
            return 2;
        }
        std::vector<double> out(static_cast<size_t>(in.rows) * m);
        check(enc ? effdim_cae_encode(cae_model, in.ptr(), in.rows, out.data())
                  : effdim_cae_decode(cae_model, in.ptr(), in.rows, out.data()));
        check(effdim_write_matrix_csv((enc ? ce_out : cd_out).c_str(), out.data(), in.rows, m));
        effdim_cae_free(cae_model);
        return 0;
    }

    if (*cae_level) {
        effdim_cae* cae_model = nullptr;
        check(effdim_cae_load(cl_cae.c_str(), &cae_model));
        int m = 0, d_eff = 0;
        effdim_cae_dims(cae_model, &m, nullptr, &d_eff);
        if (static_cast<int>(cl_nu.size()) != d_eff) {
            std::fprintf(stderr, "error: --nu needs %d value(s)\n", d_eff);
            return 2;
        }
        Matrix grid = load_csv(cl_grid);
        if (grid.cols != m - d_eff) {
            std::fprintf(stderr, "error: grid needs %d columns\n", m - d_eff);
            return 2;
        }
        Matrix reference = load_csv(cl_reference);
        auto ic = load_ic(cl_ic, cl_model);
        std::vector<double> times;
        if (!cl_times.empty()) times = parse_times(cl_times);
        else if (cl_model == "toy_enzyme") times = parse_times("2:2:10");
        else {
            std::fprintf(stderr, "error: --times required\n");
            return 2;
        }
        int obs_state = cl_obs >= 0 ? cl_obs : (cl_model == "toy_enzyme" ? 2 : 0);
        int ns = 0, np = 0;
        check(effdim_model_dims(cl_model.c_str(), &ns, &np));

        // assemble full latents, decode, re-simulate, report deviations
        std::vector<double> latents(static_cast<size_t>(grid.rows) * m);
        for (int i = 0; i < grid.rows; ++i) {
            for (int j = 0; j < d_eff; ++j) latents[static_cast<size_t>(i) * m + j] = cl_nu[j];
            for (int j = 0; j < m - d_eff; ++j)
                latents[static_cast<size_t>(i) * m + d_eff + j] =
                    grid.data[static_cast<size_t>(i) * grid.cols + j];
        }
        std::vector<double> decoded(static_cast<size_t>(grid.rows) * m);
        check(effdim_cae_decode(cae_model, latents.data(), grid.rows, decoded.data()));
        std::vector<double> table(static_cast<size_t>(grid.rows) * (m + 1));
        std::vector<double> fullgrid{0.0};
        fullgrid.insert(fullgrid.end(), times.begin(), times.end());
        double refnorm = 0;
        for (auto v : reference.data) refnorm += v * v;
        refnorm = std::sqrt(refnorm);
        for (int i = 0; i < grid.rows; ++i) {
            const double* p = decoded.data() + static_cast<size_t>(i) * m;
            bool positive = true;
            for (int j = 0; j < m; ++j) positive = positive && p[j] > 0;
            double deviation = std::nan("");
            if (positive) {
                std::vector<double> states(fullgrid.size() * static_cast<size_t>(ns));
                int st = effdim_model_simulate(cl_model.c_str(), p, ic.data(), fullgrid.data(),
                                               static_cast<int>(fullgrid.size()),
                                               cl_stiff ? 1 : 0, 1e-8, 1e-10, states.data());
                if (st == EFFDIM_OK) {
                    double acc = 0;
                    for (size_t t = 0; t < times.size(); ++t) {
                        double diff = states[(t + 1) * ns + obs_state] -
                                      reference.data[t % reference.data.size()];
                        acc += diff * diff;
                    }
                    deviation = std::sqrt(acc) / refnorm;
                }
            }
            for (int j = 0; j < m; ++j) table[static_cast<size_t>(i) * (m + 1) + j] = p[j];
            table[static_cast<size_t>(i) * (m + 1) + m] = deviation;
        }
        check(effdim_write_matrix_csv(cl_out.c_str(), table.data(), grid.rows, m + 1));
        effdim_cae_free(cae_model);
        return 0;
    }

    if (*jsf_compute) {
        Matrix a = load_csv(jc_set1), b = load_csv(jc_set2);
        if (a.rows != b.rows) {
            std::fprintf(stderr, "error: sets must be row-aligned\n");
            return 2;
        }
        effdim_jsf* basis = nullptr;
        check(effdim_jsf_compute(a.ptr(), a.rows, a.cols, b.ptr(), b.cols, jc_m, jc_d, &basis));
        check(effdim_jsf_save(basis, jc_out.c_str()));
        int n_sing = 0;
        effdim_jsf_shape(basis, nullptr, nullptr, &n_sing);
        std::vector<double> sv(static_cast<size_t>(n_sing));
        effdim_jsf_singular_values(basis, sv.data());
        std::printf("leading singular values (sqrt(2) marks common):");
        for (int i = 0; i < std::min(8, n_sing); ++i) std::printf(" %.4f", sv[i]);
        std::printf("\n");
        effdim_jsf_free(basis);
        return 0;
    }

    if (*jsf_un) {
        effdim_jsf* basis = nullptr;
        check(effdim_jsf_load(ju_jsf.c_str(), &basis));
        Matrix a = load_csv(ju_set1), b = load_csv(ju_set2);
        std::vector<double> funcs(static_cast<size_t>(a.rows) * ju_m);
        std::vector<double> sing(static_cast<size_t>(a.rows)); // generous
        int out_cols = 0;
        check(effdim_jsf_uncommon(basis, a.ptr(), a.rows, a.cols, b.ptr(), b.cols, ju_r, ju_m,
                                  funcs.data(), sing.data(), &out_cols));
        check(effdim_write_matrix_csv((ju_out + "/functions.csv").c_str(), funcs.data(), a.rows,
                                      out_cols));
        check(effdim_write_matrix_csv((ju_out + "/survival.csv").c_str(), sing.data(),
                                      std::min(a.rows, 64), 1));
        effdim_jsf_free(basis);
        return 0;
    }

    if (*jsf_spiral) {
        std::vector<double> s1(static_cast<size_t>(js_n) * 2), s2(static_cast<size_t>(js_n) * 2),
            z(static_cast<size_t>(js_n)), c(static_cast<size_t>(js_n));
        check(effdim_generate_spiral(js_n, js_seed, s1.data(), s2.data(), z.data(), c.data()));
        check(effdim_write_matrix_csv((js_out + "/set1.csv").c_str(), s1.data(), js_n, 2));
        check(effdim_write_matrix_csv((js_out + "/set2.csv").c_str(), s2.data(), js_n, 2));
        check(effdim_write_matrix_csv((js_out + "/z.csv").c_str(), z.data(), js_n, 1));
        check(effdim_write_matrix_csv((js_out + "/c.csv").c_str(), c.data(), js_n, 1));
        return 0;
    }

    if (*audit_inv) {
        effdim_gh* model = nullptr;
        check(effdim_gh_load(ai_gh.c_str(), &model));
        int dim = 0;
        effdim_gh_dims(model, &dim, nullptr, nullptr);
        Matrix pts = load_csv(ai_points);
        if (pts.cols != dim) {
            std::fprintf(stderr, "error: model expects %d coordinates\n", dim);
            return 2;
        }
        std::vector<double> dets(static_cast<size_t>(pts.rows));
        int consistent = 0;
        double min_abs = 0;
        check(effdim_audit_invertibility_gh(model, pts.ptr(), pts.rows, ai_scale ? 1 : 0,
                                            dets.data(), &consistent, &min_abs));
        check(effdim_write_matrix_csv(ai_out.c_str(), dets.data(), pts.rows, 1));
        std::printf("sign_consistent=%d min_abs_det=%.6g -> %s\n", consistent, min_abs,
                    ai_out.c_str());
        effdim_gh_free(model);
        return consistent ? 0 : 4;
    }

    if (*audit_null) {
        auto point = load_params(an_point, an_model);
        auto ic = load_ic(an_ic, an_model);
        std::vector<double> times;
        int obs_state = an_obs;
        if (an_model == "msp_full") {
            times = parse_times(an_times.empty() ? "2:2:20" : an_times);
            if (obs_state < 0) obs_state = 4;
        } else if (an_model == "compartmental_2") {
            times = parse_times(an_times.empty() ? "0.5:0.5:5" : an_times);
            if (obs_state < 0) obs_state = 0;
        } else if (an_model == "toy_enzyme") {
            times = parse_times(an_times.empty() ? "2:2:10" : an_times);
            if (obs_state < 0) obs_state = 2;
        } else {
            times = parse_times(an_times);
        }
        int ns = 0, np = 0;
        check(effdim_model_dims(an_model.c_str(), &ns, &np));
        std::vector<double> sv(static_cast<size_t>(np)),
            basis(static_cast<size_t>(np) * np);
        int null_dim = 0;
        check(effdim_sensitivity_nullspace(an_model.c_str(), point.data(), ic.data(), obs_state,
                                           times.data(), static_cast<int>(times.size()),
                                           an_step, an_thresh, an_stiff ? 1 : 0, sv.data(),
                                           basis.data(), &null_dim));
        std::vector<double> table(static_cast<size_t>(np) * (1 + null_dim));
        for (int i = 0; i < np; ++i) {
            table[static_cast<size_t>(i) * (1 + null_dim)] = sv[static_cast<size_t>(i)];
            for (int j = 0; j < null_dim; ++j)
                table[static_cast<size_t>(i) * (1 + null_dim) + 1 + j] =
                    basis[static_cast<size_t>(i) * null_dim + j];
        }
        check(effdim_write_matrix_csv(an_out.c_str(), table.data(), np, 1 + null_dim));
        std::printf("nullspace dimension: %d -> %s\n", null_dim, an_out.c_str());
        return 0;
    }

    if (*exp_run) {
        int passed = 0;
        int st = effdim_experiment_run(er_config.c_str(), er_out.empty() ? "" : er_out.c_str(),
                                       &passed);
        if (st != EFFDIM_OK) die(st);
        std::printf("experiment complete; checks %s\n", passed ? "passed" : "FAILED");
        return passed ? 0 : 4;
    }

    if (*report_emit) {
        check(effdim_report_emit(re_dir.c_str()));
        return 0;
    }

    return 0;
}
