#ifndef CS_SMOOTH_H
#define CS_SMOOTH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code for every fallible call.
 */
typedef enum CsStatus {
  CsOk = 0,
  /**
   * A pointer argument was null.
   */
  CsNullPointer = 1,
  /**
   * An argument was outside its mathematical domain.
   */
  CsDomain = 2,
  /**
   * An index or class label was out of range.
   */
  CsIndex = 3,
  /**
   * Malformed input (string encoding, matrix shape, shorthand syntax).
   */
  CsFormat = 4,
  /**
   * Invalid configuration value.
   */
  CsConfig = 5,
  /**
   * The requested quantity is undefined for this input.
   */
  CsUndefined = 6,
  /**
   * Any other failure; see `cs_last_error_message`.
   */
  CsInternal = 7,
} CsStatus;

/**
 * Opaque binary cost matrix handle.
 */
typedef struct CsCostMatrix CsCostMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread, or null if none. The pointer is
 * valid until the next failing call on the same thread; do not free it.
 */
const char *cs_last_error_message(void);

/**
 * Standard Gaussian CDF.
 */
double cs_phi(double z);

/**
 * Standard Gaussian quantile. Requires 0 < p < 1; writes through `out`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
enum CsStatus cs_phi_inv(double p, double *out);

/**
 * One-sided lower confidence bound on a binomial proportion from
 * `successes` out of `trials`, holding with the given confidence.
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
enum CsStatus cs_binom_lower(uint64_t successes, uint64_t trials, double confidence, double *out);

/**
 * One-sided upper confidence bound; counterpart of [`cs_binom_lower`].
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
enum CsStatus cs_binom_upper(uint64_t successes, uint64_t trials, double confidence, double *out);

/**
 * Parse a cost matrix from shorthand ("overall", "seedwise:3",
 * "pairwise:3->2,4") for `m` classes. On success `*out` owns the handle.
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
enum CsStatus cs_cost_matrix_parse(const char *spec, uintptr_t m, struct CsCostMatrix **out);

/**
 * Build a cost matrix from a row-major m*m array of 0/1 entries.
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
enum CsStatus cs_cost_matrix_new(const uint8_t *entries, uintptr_t m, struct CsCostMatrix **out);

/**
 * Release a cost matrix handle. Null is a no-op.
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
void cs_cost_matrix_free(struct CsCostMatrix *handle);

/**
 * Number of classes of the matrix.
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
enum CsStatus cs_cost_matrix_classes(const struct CsCostMatrix *handle, uintptr_t *out);

/**
 * Whether misclassifying `label` into some class is deemed costly.
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
enum CsStatus cs_cost_matrix_is_sensitive(const struct CsCostMatrix *handle,
                                          uintptr_t label,
                                          bool *out);

/**
 * Certified radius of the smoothed classifier at a point with smoothed
 * class probabilities `probs` (length `m`) and true label `y`. Negative
 * when the prediction is wrong.
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
enum CsStatus cs_standard_radius(const double *probs,
                                 uintptr_t m,
                                 uintptr_t y,
                                 double sigma,
                                 double *out);

/**
 * Cost-sensitive certified radius against the target set of `seed_label`
 * in the cost matrix. `*out_applicable` reports whether the certificate
 * applies (the top class is outside the target set).
 *
 * # Safety
 * Pointer arguments must be null or valid for the access implied by
 * their type (array pointers valid for `m` elements, out-pointers
 * writable, handles previously returned by this library and not freed).
 */
enum CsStatus cs_cost_sensitive_radius(const double *probs,
                                       uintptr_t m,
                                       const struct CsCostMatrix *cost,
                                       uintptr_t seed_label,
                                       double sigma,
                                       double *out_radius,
                                       bool *out_applicable);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CS_SMOOTH_H */
