#ifndef GAMMAREG_H
#define GAMMAREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GrStatus {
  GR_STATUS_OK = 0,
  GR_STATUS_NULL_POINTER = 1,
  GR_STATUS_INVALID_INPUT = 2,
  GR_STATUS_INVALID_CONFIG = 3,
  GR_STATUS_PARSE = 4,
  /**
   * Singular, non-sectorial or otherwise unusable operator.
   */
  GR_STATUS_OPERATOR = 5,
  GR_STATUS_SMALLNESS_VIOLATION = 6,
  GR_STATUS_SPEC_VIOLATION = 7,
  /**
   * Any other numerical failure: divergence, insufficient grid, failed certificate.
   */
  GR_STATUS_NUMERICAL = 8,
  GR_STATUS_IO = 9,
  GR_STATUS_PANIC = 10,
} GrStatus;

/**
 * Parsed run configuration.
 */
typedef struct GrConfig GrConfig;

/**
 * Dense sectorial operator.
 */
typedef struct GrOperator GrOperator;

/**
 * Outcome of one suite.
 */
typedef struct GrReport GrReport;

/**
 * Piecewise-constant function of time with values in `ℓ^q_n`.
 */
typedef struct GrStep GrStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gr_version(void);

/**
 * Copies the calling thread's last error message. Returns the size needed.
 *
 * # Safety
 * `buf` must be null or writable for `len` bytes.
 */
size_t gr_last_error(char *buf, size_t len);

/**
 * Operator from an `n × n` row-major matrix.
 *
 * # Safety
 * `data` must hold `n * n` doubles and `out` must be writable.
 */
enum GrStatus gr_operator_new(size_t n, const double *data, struct GrOperator **out);

/**
 * # Safety
 * `op` must be null or come from [`gr_operator_new`] and not be freed twice.
 */
void gr_operator_free(struct GrOperator *op);

/**
 * Step function with `intervals + 1` increasing knots and one vector of
 * length `dim` per interval, stored consecutively in `values`.
 *
 * # Safety
 * `knots` must hold `intervals + 1` doubles, `values` `intervals * dim`.
 */
enum GrStatus gr_step_new(size_t intervals,
                          const double *knots,
                          size_t dim,
                          const double *values,
                          double q,
                          struct GrStep **out);

/**
 * # Safety
 * `f` must be null or come from [`gr_step_new`] and not be freed twice.
 */
void gr_step_free(struct GrStep *f);

/**
 * Exact γ-norm; needs `q = 2`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GrStatus gr_gamma_norm_hilbert(const struct GrStep *f, double *value);

/**
 * Monte Carlo γ-norm with its standard error.
 *
 * # Safety
 * Pointers must be valid; `stderr_out` may be null.
 */
enum GrStatus gr_gamma_norm_mc(const struct GrStep *f,
                               size_t samples,
                               uint64_t seed,
                               double *value,
                               double *stderr_out);

/**
 * Both sides of the weighted Hardy inequality, the constant included in `rhs`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GrStatus gr_hardy_check(const struct GrStep *f, double alpha, double *lhs, double *rhs);

/**
 * Square-function norm of `x` for `φ(z) = z^{1/2}e^{−z}` in `ℓ^q_n`.
 *
 * # Safety
 * `x` must hold as many doubles as the operator dimension.
 */
enum GrStatus gr_sqfn_norm(const struct GrOperator *a, const double *x, double q, double *value);

/**
 * Largest observed maximal-regularity ratio over seeded random forcings in `ℓ²`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GrStatus gr_maxreg_constant(const struct GrOperator *a,
                                 size_t trials,
                                 uint64_t seed,
                                 double *value);

/**
 * Parses a TOML configuration; an empty string gives the defaults.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
enum GrStatus gr_config_parse(const char *toml, struct GrConfig **out);

/**
 * # Safety
 * `cfg` must be null or come from [`gr_config_parse`] and not be freed twice.
 */
void gr_config_free(struct GrConfig *cfg);

/**
 * Runs one suite by name (`"gamma-norm"`, `"heat"`, ...).
 *
 * # Safety
 * `suite` must be a NUL-terminated string; other pointers must be valid.
 */
enum GrStatus gr_run_suite(const struct GrConfig *cfg, const char *suite, struct GrReport **out);

/**
 * # Safety
 * `r` must be null or come from [`gr_run_suite`] and not be freed twice.
 */
void gr_report_free(struct GrReport *r);

/**
 * 1 if every check passed, 0 if not, −1 for a null report.
 *
 * # Safety
 * `r` must be null or valid.
 */
int32_t gr_report_passed(const struct GrReport *r);

/**
 * # Safety
 * `r` must be null or valid.
 */
size_t gr_report_check_count(const struct GrReport *r);

/**
 * Value, bound and pass flag of check `i`; `criterion` is 0 when untagged.
 *
 * # Safety
 * All pointers must be valid.
 */
enum GrStatus gr_report_check(const struct GrReport *r,
                              size_t i,
                              double *value,
                              double *bound,
                              int32_t *passed,
                              uint8_t *criterion);

/**
 * Copies the name of check `i`. Returns the size needed, 0 if out of range.
 *
 * # Safety
 * `buf` must be null or writable for `len` bytes.
 */
size_t gr_report_check_name(const struct GrReport *r, size_t i, char *buf, size_t len);

/**
 * Copies the suite CSV. Returns the size needed, 0 for a null report.
 *
 * # Safety
 * `buf` must be null or writable for `len` bytes.
 */
size_t gr_report_csv(const struct GrReport *r, char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAMMAREG_H */
