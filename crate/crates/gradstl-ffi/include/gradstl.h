#ifndef GRADSTL_H
#define GRADSTL_H

/* Generated by cbindgen from the gradstl-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every API call.
 */
typedef enum GradstlStatus {
  GRADSTL_STATUS_OK = 0,
  /**
   * A pointer was null, a buffer was mis-sized, or an index or
   * parameter was out of range.
   */
  GRADSTL_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Signal or formula text could not be parsed.
   */
  GRADSTL_STATUS_PARSE_ERROR = 2,
  /**
   * Evaluation failed (unbound variable, bad gamma, arithmetic
   * domain error).
   */
  GRADSTL_STATUS_EVAL_ERROR = 3,
  /**
   * An internal panic was caught at the boundary.
   */
  GRADSTL_STATUS_PANIC = 4,
} GradstlStatus;

/**
 * Opaque formula handle.
 */
typedef struct GradstlFormula GradstlFormula;

/**
 * Opaque signal handle.
 */
typedef struct GradstlSignal GradstlSignal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *gradstl_last_error(void);

/**
 * Load a signal from a CSV file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid
 * pointer; on `Ok` the caller owns the handle written to `*out` and
 * must release it with [`gradstl_signal_free`].
 */
enum GradstlStatus gradstl_signal_load(const char *path, struct GradstlSignal **out);

/**
 * Build a signal from raw arrays: `names` holds `width` variable
 * names, `times` holds `samples` timestamps, and `values` holds
 * `samples * width` entries in row-major order.
 *
 * # Safety
 * All pointers must be valid for the stated lengths; `out` as in
 * [`gradstl_signal_load`].
 */
enum GradstlStatus gradstl_signal_from_data(const char *const *names,
                                            size_t width,
                                            const double *times,
                                            const double *values,
                                            size_t samples,
                                            struct GradstlSignal **out);

/**
 * Number of samples in the signal; 0 if the handle is null.
 *
 * # Safety
 * `signal` must be null or a live handle from this API.
 */
size_t gradstl_signal_sample_count(const struct GradstlSignal *signal);

/**
 * Number of variables per sample; 0 if the handle is null.
 *
 * # Safety
 * `signal` must be null or a live handle from this API.
 */
size_t gradstl_signal_width(const struct GradstlSignal *signal);

/**
 * Release a signal handle. Null is ignored.
 *
 * # Safety
 * `signal` must have come from this API and not been freed before.
 */
void gradstl_signal_free(struct GradstlSignal *signal);

/**
 * Parse formula text against the variables of `signal`.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string, `signal` a live
 * handle; on `Ok` the caller owns `*out` and must release it with
 * [`gradstl_formula_free`].
 */
enum GradstlStatus gradstl_formula_parse(const char *text,
                                         const struct GradstlSignal *signal,
                                         struct GradstlFormula **out);

/**
 * Release a formula handle. Null is ignored.
 *
 * # Safety
 * `formula` must have come from [`gradstl_formula_parse`] and not
 * been freed before.
 */
void gradstl_formula_free(struct GradstlFormula *formula);

/**
 * Boolean satisfaction at sample `at`; writes 1 or 0 to `out`.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum GradstlStatus gradstl_check(const struct GradstlSignal *signal,
                                 const struct GradstlFormula *formula,
                                 size_t at,
                                 bool *out);

/**
 * Smooth robustness at sample `at` (gamma 0 for the hard semantics).
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum GradstlStatus gradstl_robustness(const struct GradstlSignal *signal,
                                      const struct GradstlFormula *formula,
                                      size_t at,
                                      double gamma,
                                      double *out);

/**
 * Robustness and its gradient at sample `at`. `buffer` receives the
 * partial derivatives in row-major `samples x width` order and
 * `buffer_len` must equal that product exactly.
 *
 * # Safety
 * Handles must be live, `out_value` valid, and `buffer` valid for
 * `buffer_len` doubles.
 */
enum GradstlStatus gradstl_gradient(const struct GradstlSignal *signal,
                                    const struct GradstlFormula *formula,
                                    size_t at,
                                    double gamma,
                                    double *out_value,
                                    double *buffer,
                                    size_t buffer_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRADSTL_H */
