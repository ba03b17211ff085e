#ifndef SKEWWALK_H
#define SKEWWALK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum SwStatus {
  SW_STATUS_OK = 0,
  SW_STATUS_NULL_POINTER = 1,
  SW_STATUS_INVALID_ARGUMENT = 2,
  SW_STATUS_INVALID_COEFFICIENTS = 3,
  SW_STATUS_PARSE = 4,
  SW_STATUS_LOCALIZATION_REQUIRED = 5,
  SW_STATUS_NUMERICAL = 6,
  SW_STATUS_SIMULATION = 7,
  SW_STATUS_STEP_BUDGET = 8,
  SW_STATUS_IO = 9,
  SW_STATUS_PANIC = 10,
} SwStatus;

/**
 * Boundary condition codes for [`sw_coefficients_piecewise_constant`].
 */
typedef enum SwBoundary {
  SW_BOUNDARY_DIRICHLET = 0,
  SW_BOUNDARY_NEUMANN = 1,
  SW_BOUNDARY_OPEN = 2,
  SW_BOUNDARY_BARRIER = 3,
} SwBoundary;

typedef enum SwMesh {
  SW_MESH_UNIFORM = 0,
  SW_MESH_SCALE_UNIFORM = 1,
} SwMesh;

typedef enum SwSatellites {
  SW_SATELLITES_HALF_GAP = 0,
  SW_SATELLITES_FULL_GAP = 1,
} SwSatellites;

typedef struct SwBatch SwBatch;

typedef struct SwCoefficients SwCoefficients;

typedef struct SwSimulator SwSimulator;

/**
 * Simulator settings. Enumerations are passed as `int32_t` codes of
 * [`SwMesh`] and [`SwSatellites`].
 */
typedef struct SwSimulatorOptions {
  double delta;
  int32_t mesh;
  int32_t satellites;
  /**
   * Total step budget of an exit-mode batch.
   */
  uint64_t step_cap;
} SwSimulatorOptions;

/**
 * Terminal state of one path. `exit_side` is -1 (left), +1 (right) or 0.
 */
typedef struct SwPath {
  double t_final;
  double y_final;
  double x_final;
  int32_t exited;
  int32_t exit_side;
  int32_t hit_barrier;
  uint64_t n_steps;
} SwPath;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *sw_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sw_version(void);

struct SwSimulatorOptions sw_simulator_options_default(void);

/**
 * Parse a coefficient document (UTF-8 JSON).
 */
enum SwStatus sw_coefficients_from_json(const char *json, struct SwCoefficients **out);

/**
 * Piecewise-constant `a`, `rho` with `n` pieces starting at `starts[0..n]`
 * (`starts[0]` must equal `left`). Infinite ends are allowed.
 */
enum SwStatus sw_coefficients_piecewise_constant(double left,
                                                 double right,
                                                 int32_t bc_left,
                                                 int32_t bc_right,
                                                 const double *starts,
                                                 const double *a,
                                                 const double *rho,
                                                 size_t n,
                                                 struct SwCoefficients **out);

/**
 * Number of validation problems (0 when the coefficients are usable).
 */
enum SwStatus sw_coefficients_validate(const struct SwCoefficients *c, size_t *violations);

void sw_coefficients_free(struct SwCoefficients *c);

/**
 * Compile a simulator for bounded coefficients.
 */
enum SwStatus sw_simulator_new(const struct SwCoefficients *c,
                               const struct SwSimulatorOptions *opts,
                               struct SwSimulator **out);

/**
 * Compile a simulator for starts in `[x_lo, x_hi]` up to `horizon`,
 * localizing infinite ends.
 */
enum SwStatus sw_simulator_for_horizon(const struct SwCoefficients *c,
                                       const struct SwSimulatorOptions *opts,
                                       double x_lo,
                                       double x_hi,
                                       double horizon,
                                       struct SwSimulator **out);

enum SwStatus sw_simulator_domain(const struct SwSimulator *s, double *lo, double *hi);

void sw_simulator_free(struct SwSimulator *s);

/**
 * Run `n` paths from `x0` up to time `t`; path `i` uses stream `i` of `seed`.
 */
enum SwStatus sw_simulator_run_horizon(const struct SwSimulator *s,
                                       double x0,
                                       double t,
                                       size_t n,
                                       uint64_t seed,
                                       struct SwBatch **out);

/**
 * Run `n` paths from `x0` until absorption.
 */
enum SwStatus sw_simulator_run_exit(const struct SwSimulator *s,
                                    double x0,
                                    size_t n,
                                    uint64_t seed,
                                    struct SwBatch **out);

/**
 * Number of paths in the batch (0 for NULL).
 */
size_t sw_batch_len(const struct SwBatch *b);

uint64_t sw_batch_total_steps(const struct SwBatch *b);

enum SwStatus sw_batch_get(const struct SwBatch *b, size_t i, struct SwPath *out);

void sw_batch_free(struct SwBatch *b);

/**
 * `P_x[tau < t]` for Brownian motion started at `x` in `[-1, 1]`.
 */
enum SwStatus sw_exit_time_cdf(double t, double x, double *out);

/**
 * `P_x[B_t < y, t < tau]` for Brownian motion on `[-1, 1]`.
 */
enum SwStatus sw_killed_cdf(double t, double x, double y, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKEWWALK_H */
