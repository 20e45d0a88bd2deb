#ifndef VECCONTRACT_H
#define VECCONTRACT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Analyses available through [`vc_scenario_run_json`].
 */
typedef enum VcCommand {
  VC_COMMAND_VERIFY = 0,
  VC_COMMAND_CHECK_QM = 1,
  VC_COMMAND_CHECK_CONE_QM = 2,
} VcCommand;

/**
 * Position of a vector relative to a cone.
 */
typedef enum VcConePosition {
  VC_CONE_POSITION_INTERIOR = 0,
  VC_CONE_POSITION_BOUNDARY = 1,
  VC_CONE_POSITION_OUTSIDE = 2,
} VcConePosition;

/**
 * Status codes returned by every entry point.
 */
typedef enum VcStatus {
  VC_STATUS_OK = 0,
  VC_STATUS_NULL_POINTER = 1,
  VC_STATUS_INVALID_UTF8 = 2,
  VC_STATUS_INVALID_ARGUMENT = 3,
  VC_STATUS_PARSE_ERROR = 4,
  VC_STATUS_DIMENSION_MISMATCH = 5,
  VC_STATUS_DOMAIN_ERROR = 6,
  VC_STATUS_NUMERICAL_FAILURE = 7,
  VC_STATUS_CONFIG_ERROR = 8,
  VC_STATUS_BUFFER_TOO_SMALL = 9,
  /**
   * The analysis ran and reported a violation or counterexample.
   */
  VC_STATUS_VIOLATED = 10,
  VC_STATUS_PANIC = 99,
} VcStatus;

/**
 * Polyhedral cone `{x : G·x ≥ 0}`.
 */
typedef struct VcCone VcCone;

/**
 * Parsed expression.
 */
typedef struct VcExpr VcExpr;

/**
 * Validated non-negative gain matrix `A`.
 */
typedef struct VcGain VcGain;

/**
 * Dynamical system `ẋ = f(t, x)` with its Jacobian.
 */
typedef struct VcSystem VcSystem;

/**
 * Integrated trajectory.
 */
typedef struct VcTrajectory VcTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of the calling thread into `buf` (NUL
 * terminated, truncated to `len`). `needed`, if non-null, receives the size
 * required including the NUL. Returns the number of bytes required.
 */
size_t vc_last_error_message(char *buf, size_t len, size_t *needed);

/**
 * Library version as a NUL-terminated static string.
 */
const char *vc_version(void);

/**
 * Builds `A` from `rows × cols` row-major entries.
 */
enum VcStatus vc_gain_new(const double *entries, size_t rows, size_t cols, struct VcGain **out);

void vc_gain_free(struct VcGain *gain);

/**
 * Whether every column of `A` has a positive entry.
 */
enum VcStatus vc_gain_is_definite(const struct VcGain *gain, bool *out);

/**
 * `‖dx‖_v`; `dx` has `n` entries, `out` has `m` (rows of `A`).
 */
enum VcStatus vc_gain_norm(const struct VcGain *gain,
                           const double *dx,
                           size_t n,
                           double *out,
                           size_t m);

/**
 * `A·dvec(diag(dx)²)`.
 */
enum VcStatus vc_gain_norm_squared(const struct VcGain *gain,
                                   const double *dx,
                                   size_t n,
                                   double *out,
                                   size_t m);

/**
 * `2A·dvec(diag(dx)·diag(dxdot))`.
 */
enum VcStatus vc_gain_norm_squared_rate(const struct VcGain *gain,
                                        const double *dx,
                                        const double *dxdot,
                                        size_t n,
                                        double *out,
                                        size_t m);

/**
 * `2A·diag(dx)·h`.
 */
enum VcStatus vc_gain_frechet_apply(const struct VcGain *gain,
                                    const double *dx,
                                    const double *h,
                                    size_t n,
                                    double *out,
                                    size_t m);

/**
 * Parses `source` over the variable names `vars[0..nvars]`.
 */
enum VcStatus vc_expr_parse(const char *source,
                            const char *const *vars,
                            size_t nvars,
                            struct VcExpr **out);

void vc_expr_free(struct VcExpr *e);

/**
 * Evaluates with `values[i]` bound to the `i`-th declared variable.
 */
enum VcStatus vc_expr_eval(const struct VcExpr *e, const double *values, size_t n, double *out);

/**
 * Symbolic partial derivative with respect to `var`.
 */
enum VcStatus vc_expr_differentiate(const struct VcExpr *e, const char *var, struct VcExpr **out);

/**
 * Infix rendering into `buf`; see [`vc_last_error_message`] for the buffer
 * convention.
 */
enum VcStatus vc_expr_render(const struct VcExpr *e, char *buf, size_t len, size_t *needed);

/**
 * Builds a system from `n` right-hand sides over `t, x1 .. xn`.
 */
enum VcStatus vc_system_new(const char *const *sources,
                            size_t n,
                            bool finite_difference,
                            struct VcSystem **out);

void vc_system_free(struct VcSystem *sys);

enum VcStatus vc_system_dim(const struct VcSystem *sys, size_t *out);

/**
 * `f(t, x)` into `out[0..n]`.
 */
enum VcStatus vc_system_field(const struct VcSystem *sys,
                              double t,
                              const double *x,
                              size_t n,
                              double *out);

/**
 * Row-major Jacobian into `out[0..n*n]`.
 */
enum VcStatus vc_system_jacobian(const struct VcSystem *sys,
                                 double t,
                                 const double *x,
                                 size_t n,
                                 double *out);

/**
 * Largest eigenvalue of the symmetric part of the Jacobian.
 */
enum VcStatus vc_system_max_symmetric_eig(const struct VcSystem *sys,
                                          double t,
                                          const double *x,
                                          size_t n,
                                          double *out);

/**
 * Fixed-step RK4 from `x0`; integrates the variational system too when
 * `dx0` is non-null.
 */
enum VcStatus vc_system_integrate(const struct VcSystem *sys,
                                  const double *x0,
                                  const double *dx0,
                                  size_t n,
                                  double dt,
                                  double t0,
                                  double t_end,
                                  struct VcTrajectory **out);

void vc_trajectory_free(struct VcTrajectory *tr);

/**
 * Number of grid points.
 */
enum VcStatus vc_trajectory_len(const struct VcTrajectory *tr, size_t *out);

/**
 * Grid times into `out[0..len]`.
 */
enum VcStatus vc_trajectory_times(const struct VcTrajectory *tr, double *out, size_t len);

/**
 * State at grid index `k` into `out[0..n]`.
 */
enum VcStatus vc_trajectory_state(const struct VcTrajectory *tr, size_t k, double *out, size_t n);

/**
 * Variational state at grid index `k` into `out[0..n]`.
 */
enum VcStatus vc_trajectory_variational(const struct VcTrajectory *tr,
                                        size_t k,
                                        double *out,
                                        size_t n);

/**
 * Builds `K = {x : G·x ≥ 0}` from `rows × cols` row-major entries of `G`.
 */
enum VcStatus vc_cone_new(const double *g, size_t rows, size_t cols, struct VcCone **out);

void vc_cone_free(struct VcCone *k);

enum VcStatus vc_cone_classify(const struct VcCone *k,
                               const double *x,
                               size_t n,
                               enum VcConePosition *out);

/**
 * `x ≤_K y`.
 */
enum VcStatus vc_cone_leq(const struct VcCone *k,
                          const double *x,
                          const double *y,
                          size_t n,
                          bool *out);

/**
 * Membership of `phi` in the dual cone.
 */
enum VcStatus vc_cone_dual_contains(const struct VcCone *k, const double *phi, size_t n, bool *out);

/**
 * Metzler test on an `n × n` row-major matrix.
 */
enum VcStatus vc_check_qm_affine(const double *m, size_t n, bool *out);

/**
 * Runs an analysis on a JSON scenario and writes the JSON report to `buf`.
 *
 * Returns [`VcStatus::Ok`] when dominance holds or no counterexample is found
 * and [`VcStatus::Violated`] otherwise; in both cases the report is written.
 * `seed` is used unless the scenario sets its own.
 */
enum VcStatus vc_scenario_run_json(const char *json,
                                   enum VcCommand command,
                                   uint64_t seed,
                                   char *buf,
                                   size_t len,
                                   size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VECCONTRACT_H */
