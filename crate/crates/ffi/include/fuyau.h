#ifndef FUYAU_H
#define FUYAU_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Major version in the upper 16 bits, minor in the lower 16.
#define FY_ABI_VERSION (1 << 16)

typedef enum FyStatus {
  FY_STATUS_OK = 0,
  FY_STATUS_NULL_POINTER = 1,
  FY_STATUS_INVALID_ARGUMENT = 2,
  FY_STATUS_CONFIG_ERROR = 3,
  FY_STATUS_SOLVER_FAILURE = 4,
  FY_STATUS_INVARIANT_VIOLATION = 5,
  FY_STATUS_IO_ERROR = 6,
  FY_STATUS_PANIC = 7,
} FyStatus;

// A validated run configuration.
typedef struct FyConfig FyConfig;

// A problem with its operator coefficients and admissibility constants.
typedef struct FyProblem FyProblem;

// The converged state at `t = 1`.
typedef struct FySolution FySolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

uint32_t fy_abi_version(void);

// Copy the calling thread's last error into `buf` (NUL-terminated,
// truncated to `cap - 1` bytes) and return its full length in bytes.
// A null `buf` only reports the length.
size_t fy_last_error(char *buf, size_t cap);

// Parse and validate a TOML run configuration.
enum FyStatus fy_config_parse(const char *toml, struct FyConfig **out);

enum FyStatus fy_config_set_output_dir(struct FyConfig *config, const char *path);

void fy_config_free(struct FyConfig *config);

// Run the configured mode, writing its artifacts. `exit_code` receives the
// command-line exit code (0, 2, 3 or 4).
enum FyStatus fy_run(const struct FyConfig *config, int32_t *exit_code);

// Build the problem described by a configuration's `[grid]` and `[problem]`.
enum FyStatus fy_problem_from_config(const struct FyConfig *config, struct FyProblem **out);

// A problem with `ρ = 0`. `mu` holds `fy_grid_points(n, N)` values in grid
// order and must have zero mean; a null `mu` means `μ = 0`.
enum FyStatus fy_problem_new(uint32_t n,
                             uint32_t resolution,
                             uint32_t k,
                             double gamma,
                             double alpha,
                             double scale,
                             const double *mu,
                             size_t mu_len,
                             struct FyProblem **out);

// Number of grid points `N^{2n}`, or 0 for an invalid grid.
size_t fy_grid_points(uint32_t n, uint32_t resolution);

size_t fy_problem_points(const struct FyProblem *problem);

void fy_problem_free(struct FyProblem *problem);

// Evaluate the continuity-family residual at `t` for the state `u`,
// writing `len` values to `out`.
enum FyStatus fy_residual(const struct FyProblem *problem,
                          const double *u,
                          size_t len,
                          double t,
                          double *out);

// March from `t = 0` to `t = 1` with the default continuation settings.
enum FyStatus fy_solve(const struct FyProblem *problem, struct FySolution **out);

size_t fy_solution_len(const struct FySolution *solution);

// Borrowed pointer to the solution values, valid until `fy_solution_free`.
const double *fy_solution_values(const struct FySolution *solution);

double fy_solution_final_residual(const struct FySolution *solution);

// Admissibility margins of the solution; both are positive inside the set.
enum FyStatus fy_solution_margins(const struct FySolution *solution, double *m1, double *m2);

void fy_solution_free(struct FySolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FUYAU_H */
