/* effdim - data-driven effective-parameter discovery for parametric models.
 *
 * C interface to the core library: opaque handles, integer status codes
 * (EFFDIM_OK on success), and a thread-local message for the last failure.
 * Matrices cross the boundary as row-major double buffers allocated by the
 * caller unless noted otherwise.
 */
#ifndef EFFDIM_H
#define EFFDIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define EFFDIM_OK 0
#define EFFDIM_ERR_INVALID_ARGUMENT 1
#define EFFDIM_ERR_DIMENSION 2
#define EFFDIM_ERR_UNSUPPORTED_MODEL 3
#define EFFDIM_ERR_INTEGRATION 4
#define EFFDIM_ERR_NUMERIC 5
#define EFFDIM_ERR_NOT_CONVERGED 6
#define EFFDIM_ERR_IO 7
#define EFFDIM_ERR_CONFIG 8

const char* effdim_version(void);
/* Message describing this thread's most recent failure (empty if none). */
const char* effdim_last_error(void);

/* ------------------------------------------------------------- model zoo */
int effdim_model_count(void);
int effdim_model_name(int index, char* buf, size_t buflen);
int effdim_model_dims(const char* model, int* n_states, int* n_params);
int effdim_model_state_name(const char* model, int index, char* buf, size_t buflen);
int effdim_model_param_name(const char* model, int index, char* buf, size_t buflen);
int effdim_model_base_point(const char* model, double* params);
int effdim_model_reference_ic(const char* model, double* ic);
int effdim_model_rhs(const char* model, const double* state, const double* params,
                     double* dstate);
/* stiff_method: 0 = explicit RK45 (default contract), 1 = linearly implicit
 * extrapolation (fast path for the stiff kinetics). times[0] must be 0;
 * states receives n_times x n_states rows including the initial row. */
int effdim_model_simulate(const char* model, const double* params, const double* ic,
                          const double* times, int n_times, int stiff_method, double rtol,
                          double atol, double* states);
int effdim_model_effective_params(const char* model, const double* params, double enzyme_total,
                                  double* out, int* n_out);
int effdim_effectiveness_factor(double phi, double biot, double* eta);

/* -------------------------------------------------------------- datasets */
typedef struct effdim_dataset effdim_dataset;
/* mode_log: 0 = uniform fraction around the base point, 1 = log-uniform over
 * +-decades. */
int effdim_dataset_build_transient(const char* model, const double* base_point, int mode_log,
                                   double fraction_or_decades, int count, uint64_t seed,
                                   const double* ic, int observable_state, const double* times,
                                   int n_times, int stiff_method, effdim_dataset** out);
int effdim_dataset_build_optimization(const char* model, const double* reference,
                                      int n_reference, int n_starts, const double* base_point,
                                      int mode_log, double fraction_or_decades, uint64_t seed,
                                      const double* ic, int observable_state,
                                      const double* times, int n_times, int stiff_method,
                                      int max_iterations, double gradient_tol,
                                      effdim_dataset** out);
int effdim_dataset_load(const char* dir, effdim_dataset** out);
int effdim_dataset_save(const effdim_dataset* ds, const char* dir);
int effdim_dataset_shape(const effdim_dataset* ds, int* rows, int* in_cols, int* out_cols);
int effdim_dataset_inputs(const effdim_dataset* ds, double* buf);
int effdim_dataset_outputs(const effdim_dataset* ds, double* buf);
void effdim_dataset_free(effdim_dataset* ds);

/* ---------------------------------------------------------------- dmaps */
typedef struct effdim_embedding effdim_embedding;
/* kernel: "plain_input" | "plain_output" | "output_informed". epsilon <= 0
 * selects the built-in heuristic. Pass NULL for the matrix a variant does not
 * use. r_cutoff < 0 skips the non-harmonic selection. */
int effdim_dmaps_fit(const double* inputs, int n, int in_cols, const double* outputs,
                     int out_cols, const char* kernel, double epsilon, double c_exponent,
                     double alpha, int k, double r_cutoff, effdim_embedding** out);
int effdim_embedding_load(const char* dir, effdim_embedding** out);
int effdim_embedding_save(const effdim_embedding* emb, const char* dir);
int effdim_embedding_shape(const effdim_embedding* emb, int* n, int* n_eigenvectors);
int effdim_embedding_eigenvalues(const effdim_embedding* emb, double* buf);
int effdim_embedding_eigenvectors(const effdim_embedding* emb, double* buf);
/* count: in = capacity of idx, out = number of selected indices. */
int effdim_embedding_nonharmonic(const effdim_embedding* emb, int* idx, int* count);
int effdim_embedding_residuals(const effdim_embedding* emb, double* buf);
int effdim_nystrom_extend(const effdim_embedding* emb, const double* input_or_null,
                          const double* output_or_null, double* phi);
void effdim_embedding_free(effdim_embedding* emb);
int effdim_epsilon_heuristic(const double* points, int n, int cols, double* epsilon);

/* --------------------------------------------------- geometric harmonics */
typedef struct effdim_gh effdim_gh;
int effdim_gh_fit(const double* coords, int n, int d, const double* values, int n_out,
                  double epsilon, double delta, effdim_gh** out);
int effdim_gh_load(const char* stem, effdim_gh** out);
int effdim_gh_save(const effdim_gh* gh, const char* stem);
int effdim_gh_dims(const effdim_gh* gh, int* d, int* n_out, int* modes);
int effdim_gh_eval(const effdim_gh* gh, const double* coords, double* values);
int effdim_gh_gradient(const effdim_gh* gh, const double* coords, double* jacobian);
void effdim_gh_free(effdim_gh* gh);

/* ---------------------------------------------------- conformal autoencoder */
typedef struct effdim_cae effdim_cae;
int effdim_cae_train(const double* params, int n, int m, const double* behaviors, int n_obs,
                     int d_eff, double alpha_ortho, double lr, int epochs, int plateau,
                     uint64_t seed, effdim_cae** out);
int effdim_cae_load(const char* stem, effdim_cae** out);
int effdim_cae_save(const effdim_cae* cae, const char* stem);
int effdim_cae_dims(const effdim_cae* cae, int* m, int* n_obs, int* d_eff);
int effdim_cae_encode(const effdim_cae* cae, const double* params, int n, double* latents);
int effdim_cae_decode(const effdim_cae* cae, const double* latents, int n, double* params);
int effdim_cae_conformality(const effdim_cae* cae, const double* points, int n,
                            double* residuals);
void effdim_cae_free(effdim_cae* cae);

/* ------------------------------------------------- jointly smooth functions */
typedef struct effdim_jsf effdim_jsf;
int effdim_jsf_compute(const double* set1, int n, int d1, const double* set2, int d2,
                       int n_functions, int d_eigs, effdim_jsf** out);
int effdim_jsf_save(const effdim_jsf* jsf, const char* dir);
int effdim_jsf_load(const char* dir, effdim_jsf** out);
int effdim_jsf_shape(const effdim_jsf* jsf, int* n, int* n_functions, int* n_singular);
int effdim_jsf_functions(const effdim_jsf* jsf, double* buf);
int effdim_jsf_singular_values(const effdim_jsf* jsf, double* buf);
/* functions buffer: n x n_functions (row-major); out_cols reports how many
 * columns were actually produced. singular buffer length >= per-set d. */
int effdim_jsf_uncommon(const effdim_jsf* jsf, const double* set1, int n, int d1,
                        const double* set2, int d2, int n_smooth, int n_functions,
                        double* functions, double* singular, int* out_cols);
void effdim_jsf_free(effdim_jsf* jsf);
int effdim_generate_spiral(int n, uint64_t seed, double* set1, double* set2, double* z,
                           double* c);

/* ----------------------------------------------------------------- audits */
int effdim_audit_invertibility_gh(const effdim_gh* gh, const double* points, int n,
                                  int scale_normalize, double* determinants,
                                  int* sign_consistent, double* min_abs_det);
int effdim_injectivity_scan(const double* inputs, int n, int in_cols, const double* outputs,
                            int out_cols, double out_tol, double in_tol, int* pairs, int* count);
int effdim_sensitivity_nullspace(const char* model, const double* point, const double* ic,
                                 int observable_state, const double* times, int n_times,
                                 double fd_step_rel, double rank_threshold_rel, int stiff_method,
                                 double* singular_values, double* basis, int* null_dim);

/* --------------------------------------------------------------- pipeline */
int effdim_experiment_run(const char* config_path, const char* out_dir_override,
                          int* all_checks_passed);
int effdim_report_emit(const char* run_dir);

/* ------------------------------------------------------------- io helpers */
int effdim_read_matrix_csv(const char* path, int* rows, int* cols, double** data);
int effdim_write_matrix_csv(const char* path, const double* data, int rows, int cols);
void effdim_free(void* p);

#ifdef __cplusplus
}
#endif

#endif /* EFFDIM_H */
