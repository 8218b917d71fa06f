#ifndef SUBEXP_H
#define SUBEXP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SubexpMethod {
  SUBEXP_METHOD_AUTO = 0,
  SUBEXP_METHOD_NESTED_EXACT = 1,
  SUBEXP_METHOD_NESTED_NUMERIC = 2,
  SUBEXP_METHOD_GRID = 3,
  SUBEXP_METHOD_TRANSFORM = 4,
} SubexpMethod;

typedef enum SubexpStatus {
  SUBEXP_STATUS_OK = 0,
  SUBEXP_STATUS_NULL_POINTER = 1,
  SUBEXP_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed spec, bad argument or I/O failure.
   */
  SUBEXP_STATUS_INVALID_SPEC = 3,
  SUBEXP_STATUS_SYNTAX = 4,
  /**
   * Bound evaluation failed or bounds are out of order.
   */
  SUBEXP_STATUS_DOMAIN = 5,
  SUBEXP_STATUS_INFEASIBLE = 6,
  /**
   * The requested method does not apply or exceeds its size cap.
   */
  SUBEXP_STATUS_UNSUPPORTED = 7,
  /**
   * A convergence check failed.
   */
  SUBEXP_STATUS_HARNESS = 8,
  SUBEXP_STATUS_BUFFER_TOO_SMALL = 9,
  SUBEXP_STATUS_PANIC = 10,
} SubexpStatus;

/**
 * Opaque credal domain.
 */
typedef struct SubexpDomain SubexpDomain;

/**
 * Opaque expression in the variables `x` and `y`.
 */
typedef struct SubexpExpr SubexpExpr;

/**
 * Scalar part of an expectation result. The maximizing weights go to a
 * caller-supplied buffer.
 */
typedef struct SubexpResult {
  double value;
  double certified_error;
  /**
   * Method that produced the value.
   */
  enum SubexpMethod method;
} SubexpResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a domain from its JSON spec and stores the handle in `out`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SubexpStatus subexp_domain_from_json(const char *json, struct SubexpDomain **out);

/**
 * # Safety
 * `d` must come from [`subexp_domain_from_json`] and not be used afterwards.
 */
void subexp_domain_free(struct SubexpDomain *d);

/**
 * Number of states, or 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live domain handle.
 */
size_t subexp_domain_n_states(const struct SubexpDomain *d);

/**
 * Writes 1 to `out` if the weight vector lies in the domain within `tol`,
 * else 0.
 *
 * # Safety
 * `theta` must point to `len` doubles.
 */
enum SubexpStatus subexp_contains(const struct SubexpDomain *d,
                                  const double *theta,
                                  size_t len,
                                  double tol,
                                  int32_t *out);

/**
 * Upper expectation of the random variable `values[0..len]`.
 *
 * `grid_resolution` of 0 keeps the default. `argmax` may be null; otherwise
 * it receives the maximizing weights and must hold `n_states` doubles.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum SubexpStatus subexp_upper_expectation(const struct SubexpDomain *d,
                                           const double *values,
                                           size_t len,
                                           enum SubexpMethod method,
                                           size_t grid_resolution,
                                           struct SubexpResult *out,
                                           double *argmax,
                                           size_t argmax_len);

/**
 * Lower expectation; arguments as for [`subexp_upper_expectation`].
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum SubexpStatus subexp_lower_expectation(const struct SubexpDomain *d,
                                           const double *values,
                                           size_t len,
                                           enum SubexpMethod method,
                                           size_t grid_resolution,
                                           struct SubexpResult *out,
                                           double *argmax,
                                           size_t argmax_len);

/**
 * Lower and upper mean of `values` over the domain.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum SubexpStatus subexp_mu_bounds(const struct SubexpDomain *d,
                                   const double *values,
                                   size_t len,
                                   double *mu_lower,
                                   double *mu_upper);

/**
 * Parses an expression in `x` and `y`.
 *
 * # Safety
 * `text` must be NUL-terminated and `out` valid.
 */
enum SubexpStatus subexp_expr_parse(const char *source, struct SubexpExpr **out);

/**
 * # Safety
 * `e` must be null or a live expression handle.
 */
enum SubexpStatus subexp_expr_eval(const struct SubexpExpr *e, double x, double y, double *out);

/**
 * # Safety
 * `e` must come from [`subexp_expr_parse`] and not be used afterwards.
 */
void subexp_expr_free(struct SubexpExpr *e);

/**
 * `sup_theta E_theta[phi(X, Y)]` with X and Y independent under each theta.
 *
 * # Safety
 * `phi` must be NUL-terminated; `x` and `y` must point to `len` doubles.
 */
enum SubexpStatus subexp_per_theta_independent(const char *phi,
                                               double bound_m,
                                               double lipschitz_l,
                                               const double *x,
                                               const double *y,
                                               size_t len,
                                               const struct SubexpDomain *d,
                                               size_t grid_resolution,
                                               struct SubexpResult *out);

/**
 * `E[ E[phi(x, Y)] at x = X ]`, the nested form.
 *
 * # Safety
 * As for [`subexp_per_theta_independent`].
 */
enum SubexpStatus subexp_peng_independent(const char *phi,
                                          double bound_m,
                                          double lipschitz_l,
                                          const double *x,
                                          const double *y,
                                          size_t len,
                                          const struct SubexpDomain *d,
                                          size_t grid_resolution,
                                          struct SubexpResult *out);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *subexp_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *subexp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBEXP_H */
