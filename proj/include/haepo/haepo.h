/* C interface to the haepo library. Every function returns a haepo_status;
 * on failure haepo_last_error() describes the most recent error raised on
 * the calling thread. Handles are opaque and owned by the caller. */
#ifndef HAEPO_HAEPO_H
#define HAEPO_HAEPO_H

#include <stddef.h>
#include <stdint.h>

#if defined(HAEPO_BUILDING_LIBRARY)
#define HAEPO_API __attribute__((visibility("default")))
#else
#define HAEPO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum haepo_status {
  HAEPO_OK = 0,
  HAEPO_ERR_INVALID_ARGUMENT = 1,
  HAEPO_ERR_SHAPE_MISMATCH = 2,
  HAEPO_ERR_NON_FINITE = 3,
  HAEPO_ERR_CONFIG = 4,
  HAEPO_ERR_IO = 5,
  HAEPO_ERR_RUNTIME = 6,
  HAEPO_ERR_GATE_FAILED = 7,
  HAEPO_ERR_INTERNAL = 8
} haepo_status;

typedef enum haepo_norm_mode {
  HAEPO_NORM_SUM = 0,
  HAEPO_NORM_ZSCORE = 1,
  HAEPO_NORM_NONE = 2
} haepo_norm_mode;

typedef struct haepo_config haepo_config;
typedef struct haepo_sweep haepo_sweep;
typedef struct haepo_results haepo_results;

HAEPO_API const char* haepo_version(void);
HAEPO_API const char* haepo_last_error(void);
HAEPO_API const char* haepo_status_string(haepo_status status);

/* Configuration. Keys and values use the text config format. */
HAEPO_API haepo_status haepo_config_create(const char* experiment, haepo_config** out);
HAEPO_API haepo_status haepo_config_load(const char* path, haepo_config** out);
HAEPO_API haepo_status haepo_config_set(haepo_config* cfg, const char* key, const char* value);
/* Copies the config text into buf (NUL-terminated) and stores the full
 * length, excluding the terminator, in *needed. buf may be NULL. */
HAEPO_API haepo_status haepo_config_to_text(const haepo_config* cfg, char* buf,
                                            size_t capacity, size_t* needed);
HAEPO_API void haepo_config_destroy(haepo_config* cfg);

/* Grid over the axes that received at least one value; empty axes keep the
 * base config's setting. */
HAEPO_API haepo_status haepo_sweep_create(const haepo_config* base, haepo_sweep** out);
HAEPO_API haepo_status haepo_sweep_add_lr(haepo_sweep* sweep, double lr);
HAEPO_API haepo_status haepo_sweep_add_batch(haepo_sweep* sweep, size_t batch);
HAEPO_API haepo_status haepo_sweep_add_algorithm(haepo_sweep* sweep, const char* algo);
HAEPO_API haepo_status haepo_sweep_add_norm(haepo_sweep* sweep, const char* norm);
HAEPO_API void haepo_sweep_destroy(haepo_sweep* sweep);

/* Training runs. */
HAEPO_API haepo_status haepo_run(const haepo_config* cfg, haepo_results** out);
HAEPO_API haepo_status haepo_sweep_run(const haepo_sweep* sweep, haepo_results** out);
HAEPO_API haepo_status haepo_results_emit(const haepo_results* results, const char* out_dir);
HAEPO_API size_t haepo_results_cell_count(const haepo_results* results);
/* Number of failed cells plus aborted seeds. */
HAEPO_API size_t haepo_results_failure_count(const haepo_results* results);
/* Cell directory name; valid until the results are destroyed. */
HAEPO_API const char* haepo_results_cell_name(const haepo_results* results, size_t cell);
HAEPO_API size_t haepo_results_update_count(const haepo_results* results, size_t cell);
/* Seed-mean return of cell `cell` at 1-based update `update`. */
HAEPO_API haepo_status haepo_results_mean_return(const haepo_results* results, size_t cell,
                                                 size_t update, double* out);
HAEPO_API void haepo_results_destroy(haepo_results* results);

/* Loss on one batch. Arrays have length m; grad_L may be NULL. */
typedef struct haepo_loss_terms {
  double reward;
  double entropy;
  double kl;
  double total;
  int degenerate_batch;
} haepo_loss_terms;

HAEPO_API haepo_status haepo_loss_evaluate(const double* log_likelihoods,
                                           const double* ref_log_likelihoods,
                                           const double* returns, size_t m,
                                           double beta_ent, double lambda_kl,
                                           haepo_norm_mode norm,
                                           haepo_loss_terms* terms, double* grad_L);
HAEPO_API haepo_status haepo_pl_weights(const double* log_likelihoods, size_t m,
                                        double* weights);

/* Finite-difference check of the loss gradient. json_path may be NULL. */
typedef struct haepo_gradcheck_options {
  size_t min_batch;
  size_t max_batch;
  size_t trials;
  double eps;
  double threshold;
  double beta_ent;
  double lambda_kl;
  uint64_t seed;
} haepo_gradcheck_options;

typedef struct haepo_gradcheck_summary {
  double max_error_new_lp;
  double max_error_old_lp;
  double max_error_returns;
  double norm_new_lp;
  double norm_old_lp;
  double norm_returns;
  int passed;
} haepo_gradcheck_summary;

HAEPO_API void haepo_gradcheck_default_options(haepo_gradcheck_options* options);
/* Returns HAEPO_ERR_GATE_FAILED when an error reaches the threshold; the
 * summary is filled either way. */
HAEPO_API haepo_status haepo_gradcheck(const haepo_gradcheck_options* options,
                                       const char* json_path,
                                       haepo_gradcheck_summary* summary);

/* Normalization ablation on the chain MDP and newsvendor. Writes the cells
 * to out_dir when it is not NULL, and the check summary to report (may be
 * NULL, same buffer contract as haepo_config_to_text). Returns
 * HAEPO_ERR_GATE_FAILED when a check fails. */
HAEPO_API haepo_status haepo_ablate_norm(const uint64_t* seeds, size_t seed_count,
                                         const char* out_dir, char* report,
                                         size_t capacity, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif
