#ifndef PREFRL_H
#define PREFRL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PrefrlStatus {
  PREFRL_STATUS_OK = 0,
  PREFRL_STATUS_NULL_POINTER = 1,
  PREFRL_STATUS_INVALID_UTF8 = 2,
  PREFRL_STATUS_CONFIG = 3,
  PREFRL_STATUS_INVALID_ARGUMENT = 4,
  PREFRL_STATUS_NUMERICAL = 5,
  PREFRL_STATUS_IO = 6,
  PREFRL_STATUS_BUFFER_TOO_SMALL = 7,
  PREFRL_STATUS_NOT_RUN = 8,
  PREFRL_STATUS_PANIC = 9,
  PREFRL_STATUS_INTERNAL = 10,
} PrefrlStatus;

/**
 * Which regret curve to read.
 */
typedef enum PrefrlRegret {
  PREFRL_REGRET_SCORE = 0,
  PREFRL_REGRET_PREFERENCE = 1,
} PrefrlRegret;

/**
 * Opaque experiment handle.
 */
typedef struct PrefrlExperiment PrefrlExperiment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *prefrl_last_error(void);

/**
 * Parses and validates a JSON experiment configuration.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a writable pointer.
 */
enum PrefrlStatus prefrl_experiment_from_json(const char *json, struct PrefrlExperiment **out);

/**
 * Runs every configured seed. Running again replaces earlier results.
 *
 * # Safety
 * `exp` must be a live handle.
 */
enum PrefrlStatus prefrl_experiment_run(struct PrefrlExperiment *exp);

/**
 * Number of rounds per seed.
 *
 * # Safety
 * `exp` must be a live handle and `out` writable.
 */
enum PrefrlStatus prefrl_experiment_rounds(const struct PrefrlExperiment *exp, size_t *out);

/**
 * Number of seeds.
 *
 * # Safety
 * `exp` must be a live handle and `out` writable.
 */
enum PrefrlStatus prefrl_experiment_num_seeds(const struct PrefrlExperiment *exp, size_t *out);

/**
 * Copies the seed-mean cumulative regret curve into `buf`, which must
 * hold at least `rounds` values.
 *
 * # Safety
 * `exp` must be a live handle and `buf` valid for `len` writes.
 */
enum PrefrlStatus prefrl_experiment_mean_curve(const struct PrefrlExperiment *exp,
                                               enum PrefrlRegret kind,
                                               double *buf,
                                               size_t len);

/**
 * Final cumulative regret: mean and standard error across seeds.
 *
 * # Safety
 * `exp` must be a live handle; `mean` and `se` writable.
 */
enum PrefrlStatus prefrl_experiment_final(const struct PrefrlExperiment *exp,
                                          enum PrefrlRegret kind,
                                          double *mean,
                                          double *se);

/**
 * Whether every invariant check passed.
 *
 * # Safety
 * `exp` must be a live handle and `out` writable.
 */
enum PrefrlStatus prefrl_experiment_passed(const struct PrefrlExperiment *exp, bool *out);

/**
 * Writes `curve.csv`, `summary.json` (and `curve.svg` when configured)
 * into `dir`.
 *
 * # Safety
 * `exp` must be a live handle and `dir` a nul-terminated string.
 */
enum PrefrlStatus prefrl_experiment_write(const struct PrefrlExperiment *exp, const char *dir);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `exp` must come from [`prefrl_experiment_from_json`] and not be used again.
 */
void prefrl_experiment_free(struct PrefrlExperiment *exp);

/**
 * Logistic link.
 */
double prefrl_sigmoid(double x);

/**
 * `κ = 2 + e^{SB} + e^{−SB}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PrefrlStatus prefrl_kappa(double feature_bound, double param_bound, double *out);

/**
 * Confidence radius `β_t(δ)`, with `κ` derived from `B` and `S`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PrefrlStatus prefrl_beta(double t,
                              double delta,
                              double lambda,
                              double param_bound,
                              double feature_bound,
                              size_t dim,
                              double *out);

/**
 * `α_{d,T}(δ) = 20BS√(d log(T(1 + 2T)/δ))`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PrefrlStatus prefrl_alpha(size_t dim,
                               size_t rounds,
                               double delta,
                               double feature_bound,
                               double param_bound,
                               double *out);

/**
 * Log-log slope of a cumulative regret curve over its last three quarters.
 *
 * # Safety
 * `curve` must be valid for `len` reads and `out` writable.
 */
enum PrefrlStatus prefrl_sublinearity_metric(const double *curve, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREFRL_H */
