#ifndef CSOA_H
#define CSOA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define CSOA_OK 0

#define CSOA_NULL_POINTER 1

#define CSOA_INVALID_ARGUMENT 2

#define CSOA_NUMERIC 3

#define CSOA_CAPABILITY 4

#define CSOA_PANIC 5

#define CSOA_BUFFER_TOO_SMALL 6

#define CSOA_ALGORITHM_CSOA 0

#define CSOA_ALGORITHM_FW_CSOA 1

#define CSOA_SET_L2_BALL 0

#define CSOA_SET_L1_BALL 1

/**
 * A problem together with its feasible set.
 */
typedef struct CsoaProblem CsoaProblem;

/**
 * A finished run.
 */
typedef struct CsoaRun CsoaRun;

typedef struct CsoaConstants {
  double sigma_f;
  double sigma_h;
  double sigma_lambda;
  double g_f;
  double g_h;
  double l_f;
  double l_h;
  double diameter;
  double slater_sigma;
  size_t n_constraints;
} CsoaConstants;

typedef struct CsoaHyperParams {
  double eta;
  double delta;
  double upsilon;
  double rho;
  size_t horizon;
  uint64_t seed;
} CsoaHyperParams;

typedef struct CsoaRunStats {
  size_t dim;
  size_t n_constraints;
  size_t trace_len;
  size_t projection_calls;
  size_t lmo_calls;
  double max_lambda_norm;
} CsoaRunStats;

typedef struct CsoaTraceRow {
  size_t t;
  double obj_est;
  double obj_avg;
  double lambda_norm;
  double eta;
  double upsilon;
} CsoaTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *csoa_last_error_message(void);

/**
 * Quadratic test problem `min E|x - theta|^2` s.t. `E[<a, x> - b + nu] <= 0`
 * over an l2 (`CSOA_SET_L2_BALL`) or l1 (`CSOA_SET_L1_BALL`) ball.
 *
 * # Safety
 * `mu` and `a` must point to `dim` doubles; `out` must be writable.
 */
int32_t csoa_problem_desk_qp(const double *mu,
                             const double *a,
                             size_t dim,
                             double b,
                             double radius,
                             double noise,
                             size_t batch,
                             int32_t set_kind,
                             struct CsoaProblem **out);

/**
 * Fairness-constrained logistic regression on generated two-class Gaussian
 * data with covariance budget `c` and an l2 ball of `radius`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t csoa_problem_fairness_synthetic(size_t n_samples,
                                        double c,
                                        double radius,
                                        size_t batch,
                                        uint64_t data_seed,
                                        struct CsoaProblem **out);

/**
 * # Safety
 * `problem` must come from a constructor and not be used afterwards.
 */
void csoa_problem_free(struct CsoaProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle; out pointers must be writable.
 */
int32_t csoa_problem_shape(const struct CsoaProblem *problem, size_t *dim, size_t *n_constraints);

/**
 * Exact constants for the quadratic problem; sampled estimates (with the
 * origin as Slater point) otherwise.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
int32_t csoa_problem_constants(const struct CsoaProblem *problem,
                               uint64_t seed,
                               struct CsoaConstants *out);

/**
 * Step parameters of the projected schedule for `horizon` iterations.
 *
 * # Safety
 * `constants` must be readable and `out` writable.
 */
int32_t csoa_schedule_theorem1(const struct CsoaConstants *constants,
                               size_t horizon,
                               uint64_t seed,
                               struct CsoaHyperParams *out);

/**
 * Runs `algorithm` from the origin, recording every `trace_stride`-th
 * iteration (0 picks about 200 rows).
 *
 * # Safety
 * `problem` must be a live handle, `params` readable and `out` writable.
 */
int32_t csoa_run(const struct CsoaProblem *problem,
                 int32_t algorithm,
                 const struct CsoaHyperParams *params,
                 size_t trace_stride,
                 struct CsoaRun **out);

/**
 * # Safety
 * `run` must come from `csoa_run` and not be used afterwards.
 */
void csoa_run_free(struct CsoaRun *run);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
int32_t csoa_run_stats(const struct CsoaRun *run, struct CsoaRunStats *out);

/**
 * Scalar fields of trace row `index`.
 *
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
int32_t csoa_run_trace_row(const struct CsoaRun *run, size_t index, struct CsoaTraceRow *out);

/**
 * Running constraint averages at trace row `index`.
 *
 * # Safety
 * `run` must be a live handle; `buf` must hold `capacity` doubles and `len`
 * must be writable.
 */
int32_t csoa_run_trace_h_avg(const struct CsoaRun *run,
                             size_t index,
                             double *buf,
                             size_t capacity,
                             size_t *len);

/**
 * Final iterate `x_{T+1}`.
 *
 * # Safety
 * `run` must be a live handle; `buf` must hold `capacity` doubles and `len`
 * must be writable.
 */
int32_t csoa_run_final_x(const struct CsoaRun *run, double *buf, size_t capacity, size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSOA_H */
