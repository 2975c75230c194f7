/* C interface of the minsub library. Every call returns a status code;
 * MINSUB_OK is zero. After a failure minsub_last_error() describes it
 * (per thread). Strings handed out by the library are freed with
 * minsub_string_free. */
#ifndef MINSUB_H
#define MINSUB_H

#include <stddef.h>
#include <stdint.h>

#if defined(MINSUB_BUILDING_LIBRARY)
#define MINSUB_API __attribute__((visibility("default")))
#else
#define MINSUB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum minsub_status {
  MINSUB_OK = 0,
  MINSUB_DOMAIN_ERROR = 1,
  MINSUB_DEGENERATE_METRIC = 2,
  MINSUB_UNKNOWN_MODEL = 3,
  MINSUB_INVALID_PARAMS = 4,
  MINSUB_LEFT_DOMAIN = 5,
  MINSUB_NO_CONVERGENCE = 6,
  MINSUB_RADIUS_TOO_LARGE = 7,
  MINSUB_DEGENERATE_ELEMENT = 8,
  MINSUB_FRAME_FAILURE = 9,
  MINSUB_STRUCTURE_MISMATCH = 10,
  MINSUB_SINGULAR_JACOBIAN = 11,
  MINSUB_DOMAIN_ESCAPE = 12,
  MINSUB_COLLAPSE_DETECTED = 13,
  MINSUB_SEED_OUTSIDE_BALL = 14,
  MINSUB_CONFIG_ERROR = 15,
  MINSUB_IO_ERROR = 16,
  MINSUB_INVALID_ARGUMENT = 17,
  MINSUB_INTERNAL_ERROR = 100
} minsub_status;

typedef struct minsub_metric minsub_metric;
typedef struct minsub_immersion minsub_immersion;
typedef struct minsub_graph minsub_graph;

/* Values that override a scenario file. Zero-initialise and set what is
 * needed; NULL strings and has_* = 0 mean "keep the file's value". */
typedef struct minsub_overrides {
  const char* out_dir;
  const char* experiment; /* reject files asking for another experiment */
  int has_seed;
  uint64_t seed;
  int has_tolerance;
  double tolerance;
  int workers; /* 0 or 1 runs serially */
} minsub_overrides;

MINSUB_API const char* minsub_version(void);
MINSUB_API const char* minsub_last_error(void);
MINSUB_API const char* minsub_status_name(int status);
/* 2 for configuration problems (bad file, unknown model, bad parameters),
 * 1 for other failures, 0 for MINSUB_OK. */
MINSUB_API int minsub_exit_code(int status);
MINSUB_API void minsub_string_free(char* s);

/* Metric built from a TOML table: model = "...", optional mode, product,
 * collar, [params] and [functions]. */
MINSUB_API int minsub_metric_from_toml(const char* toml_text, minsub_metric** out);
MINSUB_API void minsub_metric_free(minsub_metric* m);
MINSUB_API int minsub_metric_dim(const minsub_metric* m, int* dim);
/* beta and the fiber metric g (row-major, (dim-1)^2 entries) at p. */
MINSUB_API int minsub_metric_eval(const minsub_metric* m, const double* p, double* beta, double* g);
/* ranges holds dim (lo, hi) pairs. The report is JSON. */
MINSUB_API int minsub_metric_classify(const minsub_metric* m, const double* ranges, int samples,
                                      double relative_tolerance, char** report_json);

MINSUB_API int minsub_immersion_load(const char* path, minsub_immersion** out);
/* closed = 1 for a closed curve, 0 for an open one. */
MINSUB_API int minsub_immersion_curve(const double* coords, int vertices, int dim, int closed,
                                      minsub_immersion** out);
MINSUB_API int minsub_immersion_save(const minsub_immersion* imm, const char* path);
MINSUB_API void minsub_immersion_free(minsub_immersion* imm);
MINSUB_API int minsub_immersion_size(const minsub_immersion* imm, int* vertices, int* dim);
MINSUB_API int minsub_immersion_length(const minsub_immersion* imm, const minsub_metric* m,
                                       double* length);
/* Runs the length flow with default policy (Sobolev preconditioner) and
 * the given residual tolerance. final may be NULL. */
MINSUB_API int minsub_flow(const minsub_immersion* seed, const minsub_metric* m, double tolerance,
                           char** trace_json, minsub_immersion** final_immersion);

MINSUB_API int minsub_graph_load(const char* csv_path, minsub_graph** out);
MINSUB_API int minsub_graph_save(const minsub_graph* g, const char* csv_path);
MINSUB_API void minsub_graph_free(minsub_graph* g);
MINSUB_API int minsub_graph_size(const minsub_graph* g, int* nodes);
/* Largest |nH| over interior nodes. */
MINSUB_API int minsub_graph_residual(const minsub_graph* g, const minsub_metric* m, double* infnorm);

/* Scenario files and batches. report_json / summary_json may be NULL. */
MINSUB_API int minsub_run_scenario(const char* config_path, const minsub_overrides* ov,
                                   char** report_json);
MINSUB_API int minsub_run_batch(const char* dir, const minsub_overrides* ov, char** summary_json);
/* suite: formulas, theorems, solvers or all. Fails only for an unknown
 * suite; check failures are rows of the report. *all_pass is 1 when every
 * row passed. */
MINSUB_API int minsub_verify(const char* suite, int workers, char** text, char** json,
                             int* all_pass);
MINSUB_API int minsub_report(const char* out_dir, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
