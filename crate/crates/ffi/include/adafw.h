#ifndef ADAFW_H
#define ADAFW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AdafwStatus {
  ADAFW_STATUS_OK = 0,
  ADAFW_STATUS_NULL_POINTER = 1,
  ADAFW_STATUS_INVALID_ARGUMENT = 2,
  ADAFW_STATUS_DIMENSION_MISMATCH = 3,
  ADAFW_STATUS_INFEASIBLE = 4,
  ADAFW_STATUS_UNSUPPORTED = 5,
  ADAFW_STATUS_NOT_SEPARABLE = 6,
  ADAFW_STATUS_PARSE = 7,
  ADAFW_STATUS_IO = 8,
  ADAFW_STATUS_NON_FINITE = 9,
  ADAFW_STATUS_INVARIANT_VIOLATION = 10,
  ADAFW_STATUS_PANIC = 11,
} AdafwStatus;

typedef enum AdafwRegionKind {
  ADAFW_REGION_KIND_L1_BALL = 0,
  ADAFW_REGION_KIND_LINF_BALL = 1,
} AdafwRegionKind;

typedef enum AdafwNorm {
  ADAFW_NORM_L1 = 0,
  ADAFW_NORM_L2 = 1,
  ADAFW_NORM_LINF = 2,
} AdafwNorm;

typedef enum AdafwLoss {
  ADAFW_LOSS_SQUARED_HINGE = 0,
  ADAFW_LOSS_SQUARED_ERROR = 1,
  ADAFW_LOSS_LOGISTIC = 2,
  ADAFW_LOSS_SIGMOID_NONCONVEX = 3,
} AdafwLoss;

typedef struct AdafwObjective AdafwObjective;

typedef struct AdafwRegion AdafwRegion;

typedef struct AdafwTrace AdafwTrace;

/**
 * One trace row.
 */
typedef struct AdafwTraceRecord {
  uint64_t t;
  double epoch;
  double objective;
  double duality_gap;
  double seconds;
  uint64_t grad_evals;
  uint64_t batch_size;
} AdafwTraceRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *adafw_last_error(void);

/**
 * Static version string.
 */
const char *adafw_version(void);

/**
 * Creates a norm ball. `center` may be NULL for the origin.
 *
 * # Safety
 * `center` must be NULL or point to `n` readable doubles; `out` must be
 * writable.
 */
enum AdafwStatus adafw_region_new(enum AdafwRegionKind kind,
                                  const double *center,
                                  size_t n,
                                  double radius,
                                  struct AdafwRegion **out);

/**
 * # Safety
 * `region` must be NULL or a handle from `adafw_region_new` not yet freed.
 */
void adafw_region_free(struct AdafwRegion *region);

/**
 * Dimension of the region, 0 for NULL.
 *
 * # Safety
 * `region` must be NULL or a live handle.
 */
size_t adafw_region_dim(const struct AdafwRegion *region);

/**
 * Writes `argmin_{v ∈ C} ⟨g, v⟩` into `out`.
 *
 * # Safety
 * `g` and `out` must point to `n` doubles each; `region` must be live.
 */
enum AdafwStatus adafw_region_lmo(const struct AdafwRegion *region,
                                  const double *g,
                                  size_t n,
                                  double *out);

/**
 * # Safety
 * `x` must point to `n` doubles; `inside` must be writable.
 */
enum AdafwStatus adafw_region_contains(const struct AdafwRegion *region,
                                       const double *x,
                                       size_t n,
                                       double tol,
                                       bool *inside);

/**
 * # Safety
 * `region` must be live; `out` must be writable.
 */
enum AdafwStatus adafw_region_diameter(const struct AdafwRegion *region,
                                       enum AdafwNorm norm,
                                       double *out);

/**
 * Projection of `z` onto the region in the metric `Σ h_i d_i²`.
 *
 * # Safety
 * `z`, `h` and `out` must point to `n` doubles each.
 */
enum AdafwStatus adafw_region_metric_projection(const struct AdafwRegion *region,
                                                const double *z,
                                                const double *h,
                                                size_t n,
                                                double *out);

/**
 * Objective over a dense row-major `m × n` matrix.
 *
 * # Safety
 * `rows` must point to `m·n` doubles, `labels` to `m`; `out` must be writable.
 */
enum AdafwStatus adafw_objective_new_dense(enum AdafwLoss loss,
                                           const double *rows,
                                           const double *labels,
                                           size_t m,
                                           size_t n,
                                           bool separable,
                                           struct AdafwObjective **out);

/**
 * Objective over a LIBSVM file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AdafwStatus adafw_objective_from_libsvm(enum AdafwLoss loss,
                                             const char *path,
                                             struct AdafwObjective **out);

/**
 * # Safety
 * `obj` must be NULL or a live handle.
 */
void adafw_objective_free(struct AdafwObjective *obj);

/**
 * # Safety
 * `obj` must be live; `m` and `n` must be writable.
 */
enum AdafwStatus adafw_objective_dims(const struct AdafwObjective *obj, size_t *m, size_t *n);

/**
 * # Safety
 * `x` must point to `n` doubles; `out` must be writable.
 */
enum AdafwStatus adafw_objective_value(const struct AdafwObjective *obj,
                                       const double *x,
                                       size_t n,
                                       double *out);

/**
 * # Safety
 * `x` and `out` must point to `n` doubles each.
 */
enum AdafwStatus adafw_objective_gradient(const struct AdafwObjective *obj,
                                          const double *x,
                                          size_t n,
                                          double *out);

/**
 * Frank-Wolfe duality gap at a feasible `x`.
 *
 * # Safety
 * `x` must point to `n` doubles; handles must be live; `out` writable.
 */
enum AdafwStatus adafw_duality_gap(const struct AdafwObjective *obj,
                                   const struct AdafwRegion *region,
                                   const double *x,
                                   size_t n,
                                   double *out);

/**
 * Runs an optimizer described by a JSON config such as
 * `{"algorithm": "adacsfw", "inner_steps": 2}`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; handles must be live;
 * `out` must be writable.
 */
enum AdafwStatus adafw_run(const struct AdafwObjective *obj,
                           const struct AdafwRegion *region,
                           const char *config_json,
                           struct AdafwTrace **out);

/**
 * # Safety
 * `trace` must be NULL or a live handle.
 */
void adafw_trace_free(struct AdafwTrace *trace);

/**
 * Number of records, 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
size_t adafw_trace_len(const struct AdafwTrace *trace);

/**
 * # Safety
 * `trace` must be live; `out` must be writable.
 */
enum AdafwStatus adafw_trace_record(const struct AdafwTrace *trace,
                                    size_t index,
                                    struct AdafwTraceRecord *out);

/**
 * Copies the last iterate into `out`.
 *
 * # Safety
 * `out` must point to `n` doubles.
 */
enum AdafwStatus adafw_trace_final_point(const struct AdafwTrace *trace, double *out, size_t n);

/**
 * Writes the trace as CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `trace` must be live.
 */
enum AdafwStatus adafw_trace_write_csv(const struct AdafwTrace *trace, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADAFW_H */
