/* gmnmlab: Gaussian mixture-inspired nonlinear modules and the experiment
 * lab around them, exposed as a C shared-library surface.
 *
 * Conventions: every function that can fail returns a gml_status; the
 * thread-local message for the last failure is available through
 * gml_last_error(). Handles are opaque and freed with their *_free call.
 * Strings returned through out-parameters are heap-allocated and released
 * with gml_string_free().
 */
#ifndef GMNMLAB_H
#define GMNMLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gml_status {
  GML_OK = 0,
  GML_ERR_CONFIG = 1,   /* unreadable/invalid config or arguments */
  GML_ERR_DATA = 2,     /* missing or malformed data files */
  GML_ERR_NAN = 3,      /* training aborted on a non-finite loss */
  GML_ERR_RUNTIME = 4,  /* anything else */
} gml_status;

const char* gml_version(void);
const char* gml_last_error(void);
void gml_string_free(char* s);

/* ---- experiment runner ------------------------------------------------ */

/* Runs one experiment config; artifacts land in its `out` directory. */
gml_status gml_run(const char* config_path);

/* Runs several configs, up to `jobs` in parallel (independent outputs). */
gml_status gml_run_many(const char* const* config_paths, int count, int jobs);

/* Finite-difference check of tape gradients for a model kind. The report
 * text is returned through out_report (may be NULL); worst relative error
 * through out_worst_rel (may be NULL). Returns GML_ERR_RUNTIME when a
 * block exceeds the 1e-4 gate. */
gml_status gml_gradcheck(const char* model_kind, uint64_t seed,
                         char** out_report, double* out_worst_rel);

/* Comparison table over run directories, sorted by min test loss. Either
 * output may be NULL. */
gml_status gml_report(const char* const* run_dirs, int count, char** out_text,
                      char** out_csv);

/* ---- trained-model handles -------------------------------------------- */

typedef struct gml_model gml_model;

/* Loads a params.json snapshot written by a run. */
gml_status gml_model_load(const char* snapshot_path, gml_model** out_model);
gml_status gml_model_save(gml_model* model, const char* snapshot_path);
void gml_model_free(gml_model* model);

/* Flattened per-sample input size and output size. */
int gml_model_input_size(const gml_model* model);
int gml_model_output_size(const gml_model* model);
long gml_model_param_count(const gml_model* model, int trainable_only);

/* Evaluates one sample: x has input_size entries, out has output_size. */
gml_status gml_model_forward(gml_model* model, const double* x, int x_len,
                             double* out, int out_len);

/* Laplacian of every output w.r.t. the inputs at one point. */
gml_status gml_model_laplacian(gml_model* model, const double* x, int x_len,
                               double* out, int out_len);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GMNMLAB_H */
