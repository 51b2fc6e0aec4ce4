#include "effdim.h"

#include "effdim/conformal_ae.hpp"
#include "effdim/config.hpp"
#include "effdim/csv.hpp"
#include "effdim/dataset.hpp"
#include "effdim/dmaps.hpp"
#include "effdim/errors.hpp"
#include "effdim/experiment.hpp"
#include "effdim/extension.hpp"
#include "effdim/identifiability.hpp"
#include "effdim/jsf.hpp"
#include "effdim/models.hpp"

#include <cstring>
#include <string>

using namespace effdim;

namespace {

thread_local std::string last_error;

int code_of(const Error& e) {
    switch (e.code()) {
    case ErrorCode::invalid_argument: return EFFDIM_ERR_INVALID_ARGUMENT;
    case ErrorCode::dimension_mismatch: return EFFDIM_ERR_DIMENSION;
    case ErrorCode::unsupported_model: return EFFDIM_ERR_UNSUPPORTED_MODEL;
    case ErrorCode::integration_failure: return EFFDIM_ERR_INTEGRATION;
    case ErrorCode::numeric_failure: return EFFDIM_ERR_NUMERIC;
    case ErrorCode::not_converged: return EFFDIM_ERR_NOT_CONVERGED;
    case ErrorCode::io_error: return EFFDIM_ERR_IO;
    case ErrorCode::config_error: return EFFDIM_ERR_CONFIG;
    }
    return EFFDIM_ERR_NUMERIC;
}

template <class Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        last_error.clear();
        return EFFDIM_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return code_of(e);
    } catch (const std::exception& e) {
        last_error = e.what();
        return EFFDIM_ERR_NUMERIC;
    }
}

int copy_name(const std::string& s, char* buf, size_t buflen) {
    if (!buf || buflen == 0) return EFFDIM_ERR_INVALID_ARGUMENT;
    std::snprintf(buf, buflen, "%s", s.c_str());
    return EFFDIM_OK;
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
map_in(const double* p, int rows, int cols) {
    return {p, rows, cols};
}

void copy_out(const Eigen::MatrixXd& m, double* buf) {
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        buf, m.rows(), m.cols()) = m;
}

IntegratorOptions integrator_opts(int stiff_method, double rtol = 1e-8, double atol = 1e-10) {
    IntegratorOptions o;
    o.method = stiff_method ? OdeMethod::stiff_extrap : OdeMethod::rk45;
    if (rtol > 0) o.rtol = rtol;
    if (atol > 0) o.atol = atol;
    return o;
}

ObservableSpec observable_of(int state, const double* times, int n_times) {
    ObservableSpec obs;
    obs.state_index = state;
    obs.sample_times = Eigen::Map<const Eigen::VectorXd>(times, n_times);
    return obs;
}

} // namespace

struct effdim_dataset {
    Dataset ds;
};
struct effdim_embedding {
    Embedding emb;
};
struct effdim_gh {
    GhModel gh;
};
struct effdim_cae {
    CaeWeights cae;
};
struct effdim_jsf {
    JsfBasis jsf;
};

extern "C" {

const char* effdim_version(void) { return "1.0.0"; }
const char* effdim_last_error(void) { return last_error.c_str(); }

int effdim_model_count(void) { return static_cast<int>(model_catalog().size()); }

int effdim_model_name(int index, char* buf, size_t buflen) {
    const auto& cat = model_catalog();
    if (index < 0 || index >= static_cast<int>(cat.size())) return EFFDIM_ERR_INVALID_ARGUMENT;
    return copy_name(cat[static_cast<size_t>(index)].name, buf, buflen);
}

int effdim_model_dims(const char* model, int* n_states, int* n_params) {
    return guarded([&] {
        const auto& info = model_info(model_from_name(model));
        if (n_states) *n_states = info.n_states;
        if (n_params) *n_params = info.n_params;
    });
}

int effdim_model_state_name(const char* model, int index, char* buf, size_t buflen) {
    return guarded([&] {
        const auto& info = model_info(model_from_name(model));
        require(index >= 0 && index < info.n_states, ErrorCode::invalid_argument,
                "state index out of range");
        copy_name(info.state_names[static_cast<size_t>(index)], buf, buflen);
    });
}

int effdim_model_param_name(const char* model, int index, char* buf, size_t buflen) {
    return guarded([&] {
        const auto& info = model_info(model_from_name(model));
        require(index >= 0 && index < info.n_params, ErrorCode::invalid_argument,
                "parameter index out of range");
        copy_name(info.param_names[static_cast<size_t>(index)], buf, buflen);
    });
}

int effdim_model_base_point(const char* model, double* params) {
    return guarded([&] {
        const auto& info = model_info(model_from_name(model));
        for (int i = 0; i < info.n_params; ++i) params[i] = info.base_point[i];
    });
}

int effdim_model_reference_ic(const char* model, double* ic) {
    return guarded([&] {
        const auto& info = model_info(model_from_name(model));
        require(info.n_states > 0, ErrorCode::unsupported_model, "algebraic model has no states");
        for (int i = 0; i < info.n_states; ++i) ic[i] = info.reference_ic[i];
    });
}

int effdim_model_rhs(const char* model, const double* state, const double* params,
                     double* dstate) {
    return guarded([&] {
        ModelId id = model_from_name(model);
        const auto& info = model_info(id);
        Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(state, info.n_states);
        Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(params, info.n_params);
        Eigen::VectorXd d = evaluate_rhs(id, s, p);
        for (int i = 0; i < info.n_states; ++i) dstate[i] = d[i];
    });
}

int effdim_model_simulate(const char* model, const double* params, const double* ic,
                          const double* times, int n_times, int stiff_method, double rtol,
                          double atol, double* states) {
    return guarded([&] {
        ModelId id = model_from_name(model);
        const auto& info = model_info(id);
        Trajectory traj = integrate(
            id, Eigen::Map<const Eigen::VectorXd>(params, info.n_params),
            Eigen::Map<const Eigen::VectorXd>(ic, info.n_states),
            Eigen::Map<const Eigen::VectorXd>(times, n_times),
            integrator_opts(stiff_method, rtol, atol));
        copy_out(traj.states, states);
    });
}

int effdim_model_effective_params(const char* model, const double* params, double enzyme_total,
                                  double* out, int* n_out) {
    return guarded([&] {
        ModelId id = model_from_name(model);
        const auto& info = model_info(id);
        Eigen::VectorXd eff = analytic_effective_params(
            id, Eigen::Map<const Eigen::VectorXd>(params, info.n_params), enzyme_total);
        for (Eigen::Index i = 0; i < eff.size(); ++i) out[i] = eff[i];
        if (n_out) *n_out = static_cast<int>(eff.size());
    });
}

int effdim_effectiveness_factor(double phi, double biot, double* eta) {
    return guarded([&] { *eta = effectiveness_factor(phi, biot); });
}

int effdim_dataset_build_transient(const char* model, const double* base_point, int mode_log,
                                   double fraction_or_decades, int count, uint64_t seed,
                                   const double* ic, int observable_state, const double* times,
                                   int n_times, int stiff_method, effdim_dataset** out) {
    return guarded([&] {
        ModelId id = model_from_name(model);
        const auto& info = model_info(id);
        SamplingPlan plan{Eigen::Map<const Eigen::VectorXd>(base_point, info.n_params),
                          mode_log ? SamplingMode::log_uniform_range
                                   : SamplingMode::uniform_fraction,
                          fraction_or_decades, count, seed};
        TransientDatasetOptions opts;
        opts.integrator = integrator_opts(stiff_method);
        auto* h = new effdim_dataset{build_transient_dataset(
            id, plan, Eigen::Map<const Eigen::VectorXd>(ic, info.n_states),
            observable_of(observable_state, times, n_times), opts)};
        *out = h;
    });
}

int effdim_dataset_build_optimization(const char* model, const double* reference,
                                      int n_reference, int n_starts, const double* base_point,
                                      int mode_log, double fraction_or_decades, uint64_t seed,
                                      const double* ic, int observable_state,
                                      const double* times, int n_times, int stiff_method,
                                      int max_iterations, double gradient_tol,
                                      effdim_dataset** out) {
    return guarded([&] {
        ModelId id = model_from_name(model);
        const auto& info = model_info(id);
        require(n_reference == n_times, ErrorCode::dimension_mismatch,
                "reference length must match the sample times");
        SamplingPlan plan{Eigen::Map<const Eigen::VectorXd>(base_point, info.n_params),
                          mode_log ? SamplingMode::log_uniform_range
                                   : SamplingMode::uniform_fraction,
                          fraction_or_decades, 1, seed};
        OptimizationDatasetOptions opts;
        opts.fit.integrator = integrator_opts(stiff_method);
        if (max_iterations > 0) opts.fit.solver.max_iterations = max_iterations;
        if (gradient_tol > 0) opts.fit.solver.gradient_tol = gradient_tol;
        auto* h = new effdim_dataset{build_optimization_dataset(
            id, Eigen::Map<const Eigen::VectorXd>(reference, n_reference), n_starts, plan,
            Eigen::Map<const Eigen::VectorXd>(ic, info.n_states),
            observable_of(observable_state, times, n_times), opts)};
        *out = h;
    });
}

int effdim_dataset_load(const char* dir, effdim_dataset** out) {
    return guarded([&] { *out = new effdim_dataset{Dataset::load(dir)}; });
}

int effdim_dataset_save(const effdim_dataset* ds, const char* dir) {
    return guarded([&] { ds->ds.save(dir); });
}

int effdim_dataset_shape(const effdim_dataset* ds, int* rows, int* in_cols, int* out_cols) {
    if (!ds) return EFFDIM_ERR_INVALID_ARGUMENT;
    if (rows) *rows = static_cast<int>(ds->ds.inputs.rows());
    if (in_cols) *in_cols = static_cast<int>(ds->ds.inputs.cols());
    if (out_cols) *out_cols = static_cast<int>(ds->ds.outputs.cols());
    return EFFDIM_OK;
}

int effdim_dataset_inputs(const effdim_dataset* ds, double* buf) {
    if (!ds) return EFFDIM_ERR_INVALID_ARGUMENT;
    copy_out(ds->ds.inputs, buf);
    return EFFDIM_OK;
}

int effdim_dataset_outputs(const effdim_dataset* ds, double* buf) {
    if (!ds) return EFFDIM_ERR_INVALID_ARGUMENT;
    copy_out(ds->ds.outputs, buf);
    return EFFDIM_OK;
}

void effdim_dataset_free(effdim_dataset* ds) { delete ds; }

int effdim_dmaps_fit(const double* inputs, int n, int in_cols, const double* outputs,
                     int out_cols, const char* kernel, double epsilon, double c_exponent,
                     double alpha, int k, double r_cutoff, effdim_embedding** out) {
    return guarded([&] {
        KernelSpec spec;
        std::string kn = kernel ? kernel : "";
        if (kn == "plain_input") spec.variant = KernelVariant::plain_input;
        else if (kn == "plain_output") spec.variant = KernelVariant::plain_output;
        else if (kn == "output_informed") spec.variant = KernelVariant::output_informed;
        else fail(ErrorCode::config_error, "unknown kernel variant: " + kn);
        spec.epsilon = epsilon;
        if (c_exponent > 0) spec.c_exponent = c_exponent;
        Eigen::MatrixXd in, ou;
        if (inputs) in = map_in(inputs, n, in_cols);
        if (outputs) ou = map_in(outputs, n, out_cols);
        Embedding emb = dmaps_fit(inputs ? &in : nullptr, outputs ? &ou : nullptr, spec, alpha,
                                  k);
        if (r_cutoff >= 0) {
            SelectOptions sopts;
            sopts.r_cutoff = r_cutoff;
            select_nonharmonic(emb, sopts);
        }
        *out = new effdim_embedding{std::move(emb)};
    });
}

int effdim_embedding_load(const char* dir, effdim_embedding** out) {
    return guarded([&] { *out = new effdim_embedding{Embedding::load(dir)}; });
}

int effdim_embedding_save(const effdim_embedding* emb, const char* dir) {
    return guarded([&] { emb->emb.save(dir); });
}

int effdim_embedding_shape(const effdim_embedding* emb, int* n, int* n_eigenvectors) {
    if (!emb) return EFFDIM_ERR_INVALID_ARGUMENT;
    if (n) *n = static_cast<int>(emb->emb.eigenvectors.rows());
    if (n_eigenvectors) *n_eigenvectors = static_cast<int>(emb->emb.eigenvectors.cols());
    return EFFDIM_OK;
}

int effdim_embedding_eigenvalues(const effdim_embedding* emb, double* buf) {
    if (!emb) return EFFDIM_ERR_INVALID_ARGUMENT;
    for (Eigen::Index i = 0; i < emb->emb.eigenvalues.size(); ++i) buf[i] = emb->emb.eigenvalues[i];
    return EFFDIM_OK;
}

int effdim_embedding_eigenvectors(const effdim_embedding* emb, double* buf) {
    if (!emb) return EFFDIM_ERR_INVALID_ARGUMENT;
    copy_out(emb->emb.eigenvectors, buf);
    return EFFDIM_OK;
}

int effdim_embedding_nonharmonic(const effdim_embedding* emb, int* idx, int* count) {
    if (!emb || !count) return EFFDIM_ERR_INVALID_ARGUMENT;
    int cap = *count;
    *count = static_cast<int>(emb->emb.nonharmonic.size());
    for (int i = 0; i < std::min(cap, *count); ++i) idx[i] = emb->emb.nonharmonic[static_cast<size_t>(i)];
    return EFFDIM_OK;
}

int effdim_embedding_residuals(const effdim_embedding* emb, double* buf) {
    if (!emb) return EFFDIM_ERR_INVALID_ARGUMENT;
    for (Eigen::Index i = 0; i < emb->emb.residuals.size(); ++i) buf[i] = emb->emb.residuals[i];
    return EFFDIM_OK;
}

int effdim_nystrom_extend(const effdim_embedding* emb, const double* input_or_null,
                          const double* output_or_null, double* phi) {
    return guarded([&] {
        Eigen::VectorXd in, ou;
        if (input_or_null)
            in = Eigen::Map<const Eigen::VectorXd>(input_or_null,
                                                   emb->emb.kernel.train_inputs.cols());
        if (output_or_null)
            ou = Eigen::Map<const Eigen::VectorXd>(output_or_null,
                                                   emb->emb.kernel.train_outputs.cols());
        Eigen::VectorXd r = nystrom_extend(emb->emb, input_or_null ? &in : nullptr,
                                           output_or_null ? &ou : nullptr);
        for (Eigen::Index i = 0; i < r.size(); ++i) phi[i] = r[i];
    });
}

void effdim_embedding_free(effdim_embedding* emb) { delete emb; }

int effdim_epsilon_heuristic(const double* points, int n, int cols, double* epsilon) {
    return guarded([&] { *epsilon = epsilon_heuristic(map_in(points, n, cols)); });
}

int effdim_gh_fit(const double* coords, int n, int d, const double* values, int n_out,
                  double epsilon, double delta, effdim_gh** out) {
    return guarded([&] {
        GhOptions opts;
        if (epsilon > 0) opts.epsilon = epsilon;
        if (delta > 0) opts.delta = delta;
        *out = new effdim_gh{gh_fit(map_in(coords, n, d), map_in(values, n, n_out), opts)};
    });
}

int effdim_gh_load(const char* stem, effdim_gh** out) {
    return guarded([&] { *out = new effdim_gh{GhModel::load(stem)}; });
}

int effdim_gh_save(const effdim_gh* gh, const char* stem) {
    return guarded([&] { gh->gh.save(stem); });
}

int effdim_gh_dims(const effdim_gh* gh, int* d, int* n_out, int* modes) {
    if (!gh) return EFFDIM_ERR_INVALID_ARGUMENT;
    if (d) *d = static_cast<int>(gh->gh.train_coords.cols());
    if (n_out) *n_out = static_cast<int>(gh->gh.n_outputs());
    if (modes) *modes = static_cast<int>(gh->gh.basis_eigvals.size());
    return EFFDIM_OK;
}

int effdim_gh_eval(const effdim_gh* gh, const double* coords, double* values) {
    return guarded([&] {
        Eigen::VectorXd x =
            Eigen::Map<const Eigen::VectorXd>(coords, gh->gh.train_coords.cols());
        Eigen::VectorXd v = gh_eval(gh->gh, x);
        for (Eigen::Index i = 0; i < v.size(); ++i) values[i] = v[i];
    });
}

int effdim_gh_gradient(const effdim_gh* gh, const double* coords, double* jacobian) {
    return guarded([&] {
        Eigen::VectorXd x =
            Eigen::Map<const Eigen::VectorXd>(coords, gh->gh.train_coords.cols());
        copy_out(gh_gradient(gh->gh, x), jacobian);
    });
}

void effdim_gh_free(effdim_gh* gh) { delete gh; }

int effdim_cae_train(const double* params, int n, int m, const double* behaviors, int n_obs,
                     int d_eff, double alpha_ortho, double lr, int epochs, int plateau,
                     uint64_t seed, effdim_cae** out) {
    return guarded([&] {
        CaeConfig cfg;
        cfg.d_eff = d_eff;
        if (alpha_ortho > 0) cfg.alpha_ortho = alpha_ortho;
        if (lr > 0) cfg.lr_encoder = cfg.lr_decoder = cfg.lr_behavior = lr;
        if (epochs > 0) cfg.epochs = epochs;
        if (plateau > 0) cfg.plateau_epochs = plateau;
        cfg.seed = seed;
        auto trained =
            train_conformal_ae(map_in(params, n, m), map_in(behaviors, n, n_obs), cfg);
        *out = new effdim_cae{std::move(trained.weights)};
    });
}

int effdim_cae_load(const char* stem, effdim_cae** out) {
    return guarded([&] { *out = new effdim_cae{CaeWeights::load(stem)}; });
}

int effdim_cae_save(const effdim_cae* cae, const char* stem) {
    return guarded([&] { cae->cae.save(stem); });
}

int effdim_cae_dims(const effdim_cae* cae, int* m, int* n_obs, int* d_eff) {
    if (!cae) return EFFDIM_ERR_INVALID_ARGUMENT;
    if (m) *m = cae->cae.encoder.in_dim();
    if (n_obs) *n_obs = cae->cae.behavior.out_dim();
    if (d_eff) *d_eff = cae->cae.d_eff;
    return EFFDIM_OK;
}

int effdim_cae_encode(const effdim_cae* cae, const double* params, int n, double* latents) {
    return guarded([&] {
        copy_out(cae->cae.encode(map_in(params, n, cae->cae.encoder.in_dim())), latents);
    });
}

int effdim_cae_decode(const effdim_cae* cae, const double* latents, int n, double* params) {
    return guarded([&] {
        copy_out(cae->cae.decode(map_in(latents, n, cae->cae.encoder.out_dim())), params);
    });
}

int effdim_cae_conformality(const effdim_cae* cae, const double* points, int n,
                            double* residuals) {
    return guarded([&] {
        Eigen::VectorXd r =
            conformality_residual(cae->cae, map_in(points, n, cae->cae.encoder.in_dim()));
        for (Eigen::Index i = 0; i < r.size(); ++i) residuals[i] = r[i];
    });
}

void effdim_cae_free(effdim_cae* cae) { delete cae; }

int effdim_jsf_compute(const double* set1, int n, int d1, const double* set2, int d2,
                       int n_functions, int d_eigs, effdim_jsf** out) {
    return guarded([&] {
        JsfOptions opts;
        if (d_eigs > 0) opts.d = d_eigs;
        *out = new effdim_jsf{
            compute_jsf(map_in(set1, n, d1), map_in(set2, n, d2), n_functions, opts)};
    });
}

int effdim_jsf_save(const effdim_jsf* jsf, const char* dir) {
    return guarded([&] { jsf->jsf.save(dir); });
}

int effdim_jsf_load(const char* dir, effdim_jsf** out) {
    return guarded([&] { *out = new effdim_jsf{JsfBasis::load(dir)}; });
}

int effdim_jsf_shape(const effdim_jsf* jsf, int* n, int* n_functions, int* n_singular) {
    if (!jsf) return EFFDIM_ERR_INVALID_ARGUMENT;
    if (n) *n = static_cast<int>(jsf->jsf.functions.rows());
    if (n_functions) *n_functions = static_cast<int>(jsf->jsf.functions.cols());
    if (n_singular) *n_singular = static_cast<int>(jsf->jsf.singular_values.size());
    return EFFDIM_OK;
}

int effdim_jsf_functions(const effdim_jsf* jsf, double* buf) {
    if (!jsf) return EFFDIM_ERR_INVALID_ARGUMENT;
    copy_out(jsf->jsf.functions, buf);
    return EFFDIM_OK;
}

int effdim_jsf_singular_values(const effdim_jsf* jsf, double* buf) {
    if (!jsf) return EFFDIM_ERR_INVALID_ARGUMENT;
    for (Eigen::Index i = 0; i < jsf->jsf.singular_values.size(); ++i)
        buf[i] = jsf->jsf.singular_values[i];
    return EFFDIM_OK;
}

int effdim_jsf_uncommon(const effdim_jsf* jsf, const double* set1, int n, int d1,
                        const double* set2, int d2, int n_smooth, int n_functions,
                        double* functions, double* singular, int* out_cols) {
    return guarded([&] {
        UncommonResult r = uncommon_directions(map_in(set1, n, d1), map_in(set2, n, d2),
                                               jsf->jsf, n_smooth, n_functions, {});
        copy_out(r.functions, functions);
        for (Eigen::Index i = 0; i < r.singular_values.size(); ++i)
            singular[i] = r.singular_values[i];
        if (out_cols) *out_cols = static_cast<int>(r.functions.cols());
    });
}

void effdim_jsf_free(effdim_jsf* jsf) { delete jsf; }

int effdim_generate_spiral(int n, uint64_t seed, double* set1, double* set2, double* z,
                           double* c) {
    return guarded([&] {
        SpiralData s = generate_spiral(n, seed);
        copy_out(s.set1, set1);
        copy_out(s.set2, set2);
        for (int i = 0; i < n; ++i) {
            z[i] = s.z[i];
            c[i] = s.c[i];
        }
    });
}

int effdim_audit_invertibility_gh(const effdim_gh* gh, const double* points, int n,
                                  int scale_normalize, double* determinants,
                                  int* sign_consistent, double* min_abs_det) {
    return guarded([&] {
        auto rep = jacobian_determinants(
            gh->gh, map_in(points, n, gh->gh.train_coords.cols()), scale_normalize != 0);
        for (Eigen::Index i = 0; i < rep.determinants.size(); ++i)
            determinants[i] = rep.determinants[i];
        if (sign_consistent) *sign_consistent = rep.sign_consistent ? 1 : 0;
        if (min_abs_det) *min_abs_det = rep.min_abs_det;
    });
}

int effdim_injectivity_scan(const double* inputs, int n, int in_cols, const double* outputs,
                            int out_cols, double out_tol, double in_tol, int* pairs,
                            int* count) {
    return guarded([&] {
        auto hits = injectivity_scan(map_in(inputs, n, in_cols), map_in(outputs, n, out_cols),
                                     out_tol, in_tol);
        int cap = count ? *count : 0;
        if (count) *count = static_cast<int>(hits.size());
        for (int i = 0; i < std::min<int>(cap, static_cast<int>(hits.size())); ++i) {
            pairs[2 * i] = hits[static_cast<size_t>(i)].first;
            pairs[2 * i + 1] = hits[static_cast<size_t>(i)].second;
        }
    });
}

int effdim_sensitivity_nullspace(const char* model, const double* point, const double* ic,
                                 int observable_state, const double* times, int n_times,
                                 double fd_step_rel, double rank_threshold_rel, int stiff_method,
                                 double* singular_values, double* basis, int* null_dim) {
    return guarded([&] {
        ModelId id = model_from_name(model);
        const auto& info = model_info(id);
        NullspaceOptions opts;
        if (fd_step_rel > 0) opts.fd_step_rel = fd_step_rel;
        if (rank_threshold_rel > 0) opts.rank_threshold_rel = rank_threshold_rel;
        opts.integrator = integrator_opts(stiff_method);
        auto ns = sensitivity_nullspace(
            id, Eigen::Map<const Eigen::VectorXd>(point, info.n_params),
            Eigen::Map<const Eigen::VectorXd>(ic, info.n_states),
            observable_of(observable_state, times, n_times), opts);
        for (Eigen::Index i = 0; i < ns.singular_values.size(); ++i)
            singular_values[i] = ns.singular_values[i];
        if (basis) copy_out(ns.basis, basis);
        if (null_dim) *null_dim = static_cast<int>(ns.basis.cols());
    });
}

int effdim_experiment_run(const char* config_path, const char* out_dir_override,
                          int* all_checks_passed) {
    return guarded([&] {
        ExperimentConfig cfg = load_experiment_config(config_path);
        if (out_dir_override && out_dir_override[0]) cfg.out_dir = out_dir_override;
        RunManifest manifest = run_experiment(cfg);
        if (all_checks_passed) *all_checks_passed = manifest.all_checks_passed() ? 1 : 0;
    });
}

int effdim_report_emit(const char* run_dir) {
    return guarded([&] {
        RunManifest m = RunManifest::load(run_dir);
        emit_report(m, run_dir);
    });
}

int effdim_read_matrix_csv(const char* path, int* rows, int* cols, double** data) {
    return guarded([&] {
        Eigen::MatrixXd m = read_csv_matrix(path);
        *rows = static_cast<int>(m.rows());
        *cols = static_cast<int>(m.cols());
        auto* buf = static_cast<double*>(std::malloc(sizeof(double) * m.size()));
        require(buf != nullptr, ErrorCode::numeric_failure, "allocation failed");
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            buf, m.rows(), m.cols()) = m;
        *data = buf;
    });
}

int effdim_write_matrix_csv(const char* path, const double* data, int rows, int cols) {
    return guarded([&] { write_csv(path, map_in(data, rows, cols)); });
}

void effdim_free(void* p) { std::free(p); }

} // extern "C"
