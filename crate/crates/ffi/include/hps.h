#ifndef HPS_H
#define HPS_H

#include <stdbool.h>
#include <stddef.h>

// Result of every fallible call.
typedef enum HpsStatus {
  HPS_STATUS_OK = 0,
  HPS_STATUS_NULL_POINTER = 1,
  HPS_STATUS_INVALID_ARGUMENT = 2,
  HPS_STATUS_NOT_ELLIPTIC = 3,
  HPS_STATUS_SINGULAR = 4,
  HPS_STATUS_MISSING_BODY_OPERATORS = 5,
  HPS_STATUS_POINT_OUTSIDE_DOMAIN = 6,
  HPS_STATUS_BUFFER_TOO_SMALL = 7,
  HPS_STATUS_PANIC = 8,
} HpsStatus;

// Solution values at the global Gauss nodes.
typedef struct HpsSolution HpsSolution;

// Built operators for one problem and grid.
typedef struct HpsSolver HpsSolver;

// Scalar field `f(x, y, user_data)`, or the constant `value` when `func`
// is null. Callbacks may run concurrently from several threads.
typedef struct HpsField {
  double (*func)(double x, double y, void *user_data);
  double value;
  void *user_data;
} HpsField;

// `-c11 u_xx - 2 c12 u_xy - c22 u_yy + c1 u_x + c2 u_y + c u = g` on
// `[x0, x1] x [y0, y1]` with `u = f` on the boundary.
typedef struct HpsProblem {
  double x0;
  double x1;
  double y0;
  double y1;
  struct HpsField c11;
  struct HpsField c12;
  struct HpsField c22;
  struct HpsField c1;
  struct HpsField c2;
  struct HpsField c;
  struct HpsField f;
  struct HpsField g;
} HpsProblem;

// Leaf grid and discretization of a solver.
typedef struct HpsGridOptions {
  size_t leaves_x;
  size_t leaves_y;
  // Gauss nodes per leaf edge.
  size_t q;
  // Chebyshev nodes per leaf side; `0` selects `q + 1`.
  size_t p;
  // Build the operators needed for nonzero body loads.
  bool with_body;
} HpsGridOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *hps_last_error_message(void);

// Builds a solver for a problem described by fields.
//
// # Safety
// `problem` and `options` must point to valid structs and `out` to writable
// storage for one pointer. Callbacks and their user data must stay valid
// and thread-safe for the lifetime of the solver.
enum HpsStatus hps_solver_new(const struct HpsProblem *problem,
                              const struct HpsGridOptions *options,
                              struct HpsSolver **out);

// Builds a solver for a named manufactured case on the unit square, with
// `n_params` optional `name = value` parameter overrides.
//
// # Safety
// `name` must be a NUL-terminated string; `param_names` and `param_values`
// must hold `n_params` entries (they may be null when `n_params` is 0);
// `options` must be valid and `out` writable.
enum HpsStatus hps_solver_new_case(const char *name,
                                   const char *const *param_names,
                                   const double *param_values,
                                   size_t n_params,
                                   const struct HpsGridOptions *options,
                                   struct HpsSolver **out);

// Releases a solver. Null is ignored.
//
// # Safety
// `solver` must come from a constructor of this library and not be used
// afterwards.
void hps_solver_free(struct HpsSolver *solver);

// Number of global Gauss nodes, or 0 for a null solver.
//
// # Safety
// `solver` must be null or a live solver.
size_t hps_solver_node_count(const struct HpsSolver *solver);

// Writes the Gauss node coordinates as interleaved `x, y` pairs into `xy`,
// which must hold `2 * node_count` values.
//
// # Safety
// `solver` must be live and `xy` must be writable for `len` doubles.
enum HpsStatus hps_solver_points(const struct HpsSolver *solver, double *xy, size_t len);

// Solves for Dirichlet data `f` and body load `g`. A null `f` or `g`
// selects the solver problem's own field.
//
// # Safety
// `solver` must be live, `f` and `g` null or valid, `out` writable.
enum HpsStatus hps_solve(const struct HpsSolver *solver,
                         const struct HpsField *f,
                         const struct HpsField *g,
                         struct HpsSolution **out);

// Copies the solution at the Gauss nodes (in [`hps_solver_points`] order)
// into `values`.
//
// # Safety
// `solution` must be live and `values` writable for `len` doubles.
enum HpsStatus hps_solution_values(const struct HpsSolution *solution, double *values, size_t len);

// Evaluates the solution at `n` points given as interleaved `x, y` pairs.
//
// # Safety
// `solver` must be the solver that produced `solution`; `xy` must hold
// `2n` doubles and `values` must be writable for `n` doubles.
enum HpsStatus hps_solution_evaluate(const struct HpsSolver *solver,
                                     const struct HpsSolution *solution,
                                     const double *xy,
                                     size_t n,
                                     double *values);

// Releases a solution. Null is ignored.
//
// # Safety
// `solution` must come from [`hps_solve`] and not be used afterwards.
void hps_solution_free(struct HpsSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HPS_H */
