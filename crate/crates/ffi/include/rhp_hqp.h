#ifndef RHP_HQP_H
#define RHP_HQP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RhpMode {
  /**
   * Use the mode named in the scenario file (scenario runs only).
   */
  RHP_MODE_FROM_CONFIG = 0,
  RHP_MODE_RHP_HQP = 1,
  RHP_MODE_STRICT_BASELINE = 2,
} RhpMode;

typedef enum RhpStatus {
  RHP_STATUS_OK = 0,
  RHP_STATUS_NULL_POINTER = 1,
  RHP_STATUS_DIMENSION = 2,
  RHP_STATUS_INVALID = 3,
  RHP_STATUS_SOLVER = 4,
  RHP_STATUS_CONFIG = 5,
  RHP_STATUS_IO = 6,
  RHP_STATUS_PANIC = 7,
} RhpStatus;

/**
 * Opaque problem handle.
 */
typedef struct RhpProblem RhpProblem;

/**
 * Scalar results of a scenario run. Absent values are NaN.
 */
typedef struct RhpRunSummary {
  size_t cycles;
  double max_position_error;
  double max_orientation_error;
  double final_position_error;
  double integrated_position_error;
  double min_d_min;
  double max_velocity_jump;
  double max_psi_step;
  size_t transition_cycles;
  /**
   * Seconds.
   */
  double mean_solve_time;
  /**
   * Seconds.
   */
  double max_solve_time;
} RhpRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rhp_version(void);

/**
 * Message of the most recent failing call on this thread, or an empty
 * string. Valid until the next failing call on the same thread.
 */
const char *rhp_last_error_message(void);

/**
 * New problem over `n_joints` joint velocities, or null if `n_joints` is 0.
 */
struct RhpProblem *rhp_problem_new(size_t n_joints);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `problem` must be null or a handle from [`rhp_problem_new`] that has not
 * been freed.
 */
void rhp_problem_free(struct RhpProblem *problem);

/**
 * Appends a task `A x ≈ b` as the next priority-matrix column.
 *
 * `a` is `rows × n_joints` row-major, `b` has `rows` entries, and `w` is a
 * `rows × rows` symmetric positive definite weight, or null for identity.
 *
 * # Safety
 * Pointers must be valid for the sizes above; `problem` must be a live
 * handle.
 */
enum RhpStatus rhp_problem_add_task(struct RhpProblem *problem,
                                    uint32_t id,
                                    size_t rows,
                                    const double *a,
                                    const double *b,
                                    const double *w);

/**
 * Adds `lower ≤ C x ≤ upper`, first enforced at `level` (0 makes it hard
 * for every task level).
 *
 * # Safety
 * `c` must hold `rows × n_joints` doubles, `lower` and `upper` `rows`
 * each; `problem` must be a live handle.
 */
enum RhpStatus rhp_problem_add_constraint(struct RhpProblem *problem,
                                          uint32_t id,
                                          size_t rows,
                                          const double *c,
                                          const double *lower,
                                          const double *upper,
                                          size_t level);

/**
 * Sets the `n_levels × n_tasks` priority matrix (row-major). `n_tasks` must
 * equal the number of tasks added so far; adding a task clears it.
 *
 * # Safety
 * `psi` must hold `n_levels × n_tasks` doubles; `problem` must be a live
 * handle.
 */
enum RhpStatus rhp_problem_set_priority(struct RhpProblem *problem,
                                        size_t n_levels,
                                        size_t n_tasks,
                                        const double *psi);

/**
 * Sets the weight of the `ε‖u‖²` term added to every level.
 *
 * # Safety
 * `problem` must be a live handle.
 */
enum RhpStatus rhp_problem_set_regularization(struct RhpProblem *problem, double epsilon);

/**
 * Solves the hierarchy and writes the `n_joints` joint velocities to `x`.
 *
 * # Safety
 * `x` must hold `len` writable doubles; `problem` must be a live handle.
 */
enum RhpStatus rhp_problem_solve(struct RhpProblem *problem,
                                 enum RhpMode mode,
                                 double *x,
                                 size_t len);

/**
 * Writes the projector `P_level` of the upper `level` levels to `p`
 * (`n_joints × n_joints`, row-major). Level 0 gives the identity.
 *
 * # Safety
 * `p` must hold `len` writable doubles; `problem` must be a live handle.
 */
enum RhpStatus rhp_problem_projection(struct RhpProblem *problem,
                                      size_t level,
                                      double *p,
                                      size_t len);

/**
 * Runs a scenario file. With a non-null `out_dir` the log, summary and
 * timing files are written there. `summary` may be null.
 *
 * # Safety
 * `config_path` and `out_dir` must be null or NUL-terminated strings;
 * `summary` must be null or writable.
 */
enum RhpStatus rhp_run_scenario(const char *config_path,
                                enum RhpMode mode,
                                const char *out_dir,
                                struct RhpRunSummary *summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RHP_HQP_H */
