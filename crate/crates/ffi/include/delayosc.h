#ifndef DELAYOSC_H
#define DELAYOSC_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DelayoscStatus {
  DELAYOSC_STATUS_OK = 0,
  DELAYOSC_STATUS_NULL_POINTER = 1,
  DELAYOSC_STATUS_INVALID_ARGUMENT = 2,
  DELAYOSC_STATUS_CONFIG_ERROR = 3,
  DELAYOSC_STATUS_SOLVER_ERROR = 4,
  DELAYOSC_STATUS_SINGULAR_OPERATOR = 5,
  DELAYOSC_STATUS_BUFFER_TOO_SMALL = 6,
  DELAYOSC_STATUS_PANIC = 7,
} DelayoscStatus;

typedef enum DelayoscSign {
  DELAYOSC_SIGN_PLUS = 0,
  DELAYOSC_SIGN_MINUS = 1,
} DelayoscSign;

typedef enum DelayoscSource {
  DELAYOSC_SOURCE_CLOSED_FORM = 0,
  DELAYOSC_SOURCE_MILD_FORM = 1,
  DELAYOSC_SOURCE_STEP_ORACLE = 2,
} DelayoscSource;

/*
 Evaluator for the delayed exponential and the fundamental solutions.
 */
typedef struct DelayoscEvaluator DelayoscEvaluator;

/*
 A solver built from a JSON scenario.
 */
typedef struct DelayoscSolver DelayoscSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null after a success.
 The pointer stays valid until the next call into this library on the same
 thread.
 */
const char *delayosc_last_error(void);

/*
 Library version as a static nul-terminated string.
 */
const char *delayosc_version(void);

/*
 Creates an evaluator for the `dim × dim` operator `omega` (row-major) and delay `tau`.

 # Safety
 `omega` must point to `dim * dim` readable doubles and `out` to a writable handle slot.
 */
enum DelayoscStatus delayosc_evaluator_new(const double *omega,
                                           size_t dim,
                                           double tau,
                                           struct DelayoscEvaluator **out);

/*
 # Safety
 `ev` must be null or a handle from `delayosc_evaluator_new` not yet freed.
 */
void delayosc_evaluator_free(struct DelayoscEvaluator *ev);

/*
 Dimension of the operator, 0 for a null handle.

 # Safety
 `ev` must be null or a live evaluator handle.
 */
size_t delayosc_evaluator_dim(const struct DelayoscEvaluator *ev);

/*
 Writes `exp_τ(t; ±Ω)` row-major into `out[0..dim*dim]`.

 # Safety
 `ev` must be a live evaluator handle and `out` must hold `len` doubles.
 */
enum DelayoscStatus delayosc_delayed_exp(const struct DelayoscEvaluator *ev,
                                         double t,
                                         enum DelayoscSign sign,
                                         double *out,
                                         size_t len);

/*
 Writes the `order`-th derivative (0, 1 or 2) of `x¹_τ(t)` into `out`.

 # Safety
 `ev` must be a live evaluator handle and `out` must hold `len` doubles.
 */
enum DelayoscStatus delayosc_fundamental_x1(const struct DelayoscEvaluator *ev,
                                            double t,
                                            uint32_t order,
                                            double *out,
                                            size_t len);

/*
 Writes the `order`-th derivative (0, 1 or 2) of `x²_τ(t)` into `out`.

 # Safety
 `ev` must be a live evaluator handle and `out` must hold `len` doubles.
 */
enum DelayoscStatus delayosc_fundamental_x2(const struct DelayoscEvaluator *ev,
                                            double t,
                                            uint32_t order,
                                            double *out,
                                            size_t len);

/*
 Parses a JSON scenario and builds a solver for it.

 # Safety
 `json` must be a nul-terminated string and `out` a writable handle slot.
 */
enum DelayoscStatus delayosc_solver_from_json(const char *json, struct DelayoscSolver **out);

/*
 # Safety
 `solver` must be null or a handle from `delayosc_solver_from_json` not yet freed.
 */
void delayosc_solver_free(struct DelayoscSolver *solver);

/*
 State dimension, 0 for a null handle.

 # Safety
 `solver` must be null or a live solver handle.
 */
size_t delayosc_solver_dim(const struct DelayoscSolver *solver);

/*
 Writes `x(t)` from the chosen source into `out[0..dim]`. The step oracle
 is integrated on first use with 512 cells per segment and covers whole
 segments of length `2τ` inside the horizon.

 # Safety
 `solver` must be a live solver handle, not used concurrently, and `out` must hold `len` doubles.
 */
enum DelayoscStatus delayosc_solve(struct DelayoscSolver *solver,
                                   enum DelayoscSource source,
                                   double t,
                                   double *out,
                                   size_t len);

/*
 Writes `ẋ(t)` from the chosen source into `out[0..dim]`.

 # Safety
 Same contract as `delayosc_solve`.
 */
enum DelayoscStatus delayosc_solve_derivative(struct DelayoscSolver *solver,
                                              enum DelayoscSource source,
                                              double t,
                                              double *out,
                                              size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DELAYOSC_H */
