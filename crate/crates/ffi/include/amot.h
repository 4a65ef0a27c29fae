#ifndef AMOT_H
#define AMOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `AMOT_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum {
  AMOT_STATUS_OK = 0,
  AMOT_STATUS_NULL_POINTER = 1,
  AMOT_STATUS_INVALID_ARGUMENT = 2,
  AMOT_STATUS_MESH_ERROR = 3,
  AMOT_STATUS_SOLVER_FAILURE = 4,
  AMOT_STATUS_ITERATION_CAP = 5,
  AMOT_STATUS_NON_FINITE = 6,
  AMOT_STATUS_IO = 7,
  AMOT_STATUS_SELF_CHECK = 8,
  AMOT_STATUS_BUFFER_TOO_SMALL = 9,
  AMOT_STATUS_FINISHED = 10,
  AMOT_STATUS_PANIC = 11,
} AmotStatus;

typedef enum {
  AMOT_EXPERIMENT_SHEERING = 0,
  AMOT_EXPERIMENT_EXPANDING = 1,
} AmotExperiment;

typedef enum {
  AMOT_MODE_ADAPTIVE = 0,
  AMOT_MODE_UNIFORM = 1,
} AmotMode;

/**
 * Opaque triangulation handle.
 */
typedef struct AmotMesh AmotMesh;

/**
 * Opaque simulation handle.
 */
typedef struct AmotSimulation AmotSimulation;

/**
 * Run settings. Fill with [`amot_config_default`], then adjust.
 */
typedef struct {
  AmotExperiment experiment;
  AmotMode mode;
  double tol;
  double alpha;
  double theta;
  double epsilon;
  double sigma;
  double tau0;
  double t_final;
  /**
   * Cells per side of the uniform start mesh.
   */
  size_t mesh_n;
  /**
   * Passes through the adaptive loop allowed per time step.
   */
  size_t max_iterations;
} AmotRunConfig;

/**
 * Telemetry of one accepted step.
 */
typedef struct {
  size_t k;
  double t;
  double tau;
  size_t dofs;
  double eps_t;
  double eps_s;
  double eta;
  size_t rejects_t;
  size_t rejects_s;
  double u_min;
  double u_max;
  double wall_ms;
} AmotStepRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` as a
 * NUL-terminated string, truncating to `len` bytes. Returns the full
 * message length without the terminator; empty after a success.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t amot_last_error_message(char *buf, size_t len);

/**
 * Creates the `n` x `n` criss-cross start mesh of [-1, 1]^2.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a new handle.
 */
AmotStatus amot_mesh_uniform(size_t n, AmotMesh **out);

/**
 * Bisects the `count` triangles in `marked` plus the closure needed for
 * conformity. `mesh` is left unchanged.
 *
 * # Safety
 * `mesh` must be a live handle, `marked` must hold `count` indices and
 * `out` must be a valid pointer.
 */
AmotStatus amot_mesh_refine(const AmotMesh *mesh,
                            const size_t *marked,
                            size_t count,
                            AmotMesh **out);

/**
 * Merges marked sibling pairs whose partners are marked too. Triangles of
 * the start mesh are never removed.
 *
 * # Safety
 * Same as [`amot_mesh_refine`].
 */
AmotStatus amot_mesh_coarsen(const AmotMesh *mesh,
                             const size_t *marked,
                             size_t count,
                             AmotMesh **out);

/**
 * Writes the triangle, vertex and degree-of-freedom counts; any of the
 * out-pointers may be null.
 *
 * # Safety
 * `mesh` must be a live handle; non-null out-pointers must be writable.
 */
AmotStatus amot_mesh_counts(const AmotMesh *mesh,
                            size_t *triangles,
                            size_t *vertices,
                            size_t *dofs);

/**
 * Releases a mesh handle. Null is ignored.
 *
 * # Safety
 * `mesh` must be null or a handle not freed before.
 */
void amot_mesh_free(AmotMesh *mesh);

/**
 * Fills `out` with the preset values of `experiment` in `mode`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
AmotStatus amot_config_default(AmotExperiment experiment, AmotMode mode, AmotRunConfig *out);

/**
 * Projects the initial condition and prepares a run. Nothing is written to
 * disk; steps are driven with [`amot_simulation_step`].
 *
 * # Safety
 * `config` and `out` must be valid pointers.
 */
AmotStatus amot_simulation_new(const AmotRunConfig *config, AmotSimulation **out);

/**
 * Advances by one accepted step and writes its record to `record` (may be
 * null). Returns `AMOT_STATUS_FINISHED` once the final time is reached.
 *
 * # Safety
 * `sim` must be a live handle; `record` must be null or writable.
 */
AmotStatus amot_simulation_step(AmotSimulation *sim, AmotStepRecord *record);

/**
 * Current time and number of accepted steps; either pointer may be null.
 *
 * # Safety
 * `sim` must be a live handle; non-null out-pointers must be writable.
 */
AmotStatus amot_simulation_state(const AmotSimulation *sim, double *t, size_t *steps);

/**
 * Copies the current solution coefficients, three per triangle in vertex
 * order, into `buf`. `needed` (may be null) receives the coefficient count;
 * if `len` is smaller, nothing is copied and `AMOT_STATUS_BUFFER_TOO_SMALL`
 * is returned.
 *
 * # Safety
 * `sim` must be a live handle and `buf` must hold `len` writable doubles.
 */
AmotStatus amot_simulation_solution(const AmotSimulation *sim,
                                    double *buf,
                                    size_t len,
                                    size_t *needed);

/**
 * Releases a simulation handle. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle not freed before.
 */
void amot_simulation_free(AmotSimulation *sim);

/**
 * Runs the built-in self-tests (tableau, quadrature, mesh, assembly,
 * solver).
 */
AmotStatus amot_validate(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMOT_H */
