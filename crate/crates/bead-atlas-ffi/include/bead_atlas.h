/* C interface to the bead-atlas library. */

#ifndef BEAD_ATLAS_H
#define BEAD_ATLAS_H

/* Generated from the bead-atlas-ffi crate; edit the Rust source and regenerate with BA_REGEN_HEADER=1 cargo test -p bead-atlas-ffi --test header. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call. Anything but `Ok` leaves a description in
// [`ba_last_error_message`].
typedef enum BaStatus {
  BA_STATUS_OK = 0,
  // A required pointer argument was null.
  BA_STATUS_NULL_POINTER = 1,
  // A scalar or string argument was outside its documented domain.
  BA_STATUS_INVALID_ARGUMENT = 2,
  // The arguments do not describe a valid diagram shape.
  BA_STATUS_INVALID_SHAPE = 3,
  // The computation failed; the message has details.
  BA_STATUS_COMPUTE_FAILED = 4,
  // An output buffer was shorter than the data it must hold.
  BA_STATUS_BUFFER_TOO_SMALL = 5,
  // A panic was caught at the boundary.
  BA_STATUS_PANIC = 6,
} BaStatus;

// Bead positions on vertical threads, from the tableau bijection.
typedef struct BaBeads BaBeads;

// Seeded stream of uniform draws from one shape. Not thread-safe; use one
// sampler per thread.
typedef struct BaSampler BaSampler;

// Skew diagram shape: outer and inner partition pair with a grid scale.
typedef struct BaShape BaShape;

// Height field maximizing the bead entropy functional, with its solve
// report.
typedef struct BaSolution BaSolution;

// Standard filling of a shape: ranks 1..=N placed on threads.
typedef struct BaTableau BaTableau;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; never free it.
const char *ba_version(void);

// Message for the most recent failure on the calling thread. The pointer
// stays valid until the next failing call on the same thread; never free
// it.
const char *ba_last_error_message(void);

// Releases a string returned by this library. Null is a no-op.
void ba_string_free(char *s);

// Builds a shape from outer and inner partition row lengths, both scaled by
// `scale`. `inner` may be empty (pass null with length 0) and must fit
// inside `outer`. On success stores a new handle in `*out`.
enum BaStatus ba_shape_from_partitions(const uint64_t *outer,
                                       size_t outer_len,
                                       const uint64_t *inner,
                                       size_t inner_len,
                                       uint64_t scale,
                                       struct BaShape **out);

// Parses a shape from its JSON form (see [`ba_shape_to_json`]).
enum BaStatus ba_shape_from_json(const char *json, struct BaShape **out);

// Serializes the shape to JSON; free the string with [`ba_string_free`].
enum BaStatus ba_shape_to_json(const struct BaShape *shape, char **out);

// Releases a shape handle. Null is a no-op.
void ba_shape_free(struct BaShape *shape);

// Number of threads the shape's boxes sit on; 0 for null.
size_t ba_shape_n_threads(const struct BaShape *shape);

// Number of boxes of the shape; 0 for null.
size_t ba_shape_n_boxes(const struct BaShape *shape);

// Exact number of standard fillings as a decimal string; free it with
// [`ba_string_free`].
enum BaStatus ba_count_fillings(const struct BaShape *shape, char **out);

// Natural log of the number of standard fillings.
enum BaStatus ba_count_fillings_log(const struct BaShape *shape, double *out);

// Exact number of bead configurations of the shape's tall region with
// `extra` spare levels per thread, as a decimal string; free it with
// [`ba_string_free`]. At `extra = 0` every thread is frozen and the count
// is one.
enum BaStatus ba_count_tall(const struct BaShape *shape, uint64_t extra, char **out);

// Creates a sampler drawing uniform standard fillings of `shape`. The seed
// fixes the whole stream: equal seeds give equal draw sequences.
enum BaStatus ba_sampler_new(const struct BaShape *shape, uint64_t seed, struct BaSampler **out);

// Releases a sampler. Null is a no-op.
void ba_sampler_free(struct BaSampler *sampler);

// Draws the next uniform standard filling into a new tableau handle.
enum BaStatus ba_sampler_next_tableau(struct BaSampler *sampler, struct BaTableau **out);

// Draws the next uniform filling and pushes it through the bead bijection:
// positions on the shape's threads.
enum BaStatus ba_sampler_next_beads(struct BaSampler *sampler, struct BaBeads **out);

// Releases a tableau. Null is a no-op.
void ba_tableau_free(struct BaTableau *tableau);

// Number of threads of the tableau's shape; 0 for null.
size_t ba_tableau_n_threads(const struct BaTableau *tableau);

// Number of boxes on one thread; 0 for null or an out-of-range thread.
size_t ba_tableau_thread_len(const struct BaTableau *tableau, size_t thread);

// Copies the entry ranks of one thread, ordered along the thread, into
// `buf`. `buf_len` must be at least [`ba_tableau_thread_len`].
enum BaStatus ba_tableau_entries(const struct BaTableau *tableau,
                                 size_t thread,
                                 uint32_t *buf,
                                 size_t buf_len);

// Releases a bead configuration. Null is a no-op.
void ba_beads_free(struct BaBeads *beads);

// Number of threads carrying beads; 0 for null.
size_t ba_beads_n_threads(const struct BaBeads *beads);

// Number of beads on one thread; 0 for null or an out-of-range thread.
size_t ba_beads_thread_len(const struct BaBeads *beads, size_t thread);

// Copies the ascending bead positions of one thread into `buf`. `buf_len`
// must be at least [`ba_beads_thread_len`].
enum BaStatus ba_beads_positions(const struct BaBeads *beads,
                                 size_t thread,
                                 double *buf,
                                 size_t buf_len);

// Maximizes the bead entropy functional over admissible height fields on an
// `nx` by `ny` cell grid with the shape's boundary values. Pass 0 iterations
// or a non-positive tolerance for the defaults. A solution is returned even
// when the iteration budget runs out; check [`ba_solution_converged`].
enum BaStatus ba_solve_limit_shape(const struct BaShape *shape,
                                   size_t nx,
                                   size_t ny,
                                   size_t max_iters,
                                   double tol,
                                   struct BaSolution **out);

// Releases a solution. Null is a no-op.
void ba_solution_free(struct BaSolution *solution);

// Cells along x of the solution grid; 0 for null.
size_t ba_solution_nx(const struct BaSolution *solution);

// Cells along y of the solution grid; 0 for null.
size_t ba_solution_ny(const struct BaSolution *solution);

// Final value of the entropy functional; NaN for null.
double ba_solution_objective(const struct BaSolution *solution);

// Update passes the solve spent; 0 for null.
size_t ba_solution_iterations(const struct BaSolution *solution);

// Whether the solve certified a stationary point within its budget.
bool ba_solution_converged(const struct BaSolution *solution);

// Worst boundary, monotonicity, or slope-bound violation of the returned
// field; NaN for null.
double ba_solution_feasibility(const struct BaSolution *solution);

// Bilinear height at (x, y) in the unit square; NaN for null.
double ba_solution_eval(const struct BaSolution *solution, double x, double y);

// Copies all node heights into `buf` in row-major order: node (i, j) at
// position x = i/nx, y = j/ny lands at index `j * (nx + 1) + i`. `buf_len`
// must be at least `(nx + 1) * (ny + 1)`.
enum BaStatus ba_solution_values(const struct BaSolution *solution, double *buf, size_t buf_len);

// Entropy density at slope (s, t): 0 for t <= 0, negative infinity on the
// walls |s| >= 1/2 with t > 0.
double ba_bead_entropy(double s, double t);

// Free energy of the weighted bead model at parameters (alpha, gamma);
// requires alpha > 0 and -1 < gamma < 1.
enum BaStatus ba_free_energy(double alpha, double gamma, double *out);

// Log partition function of the p by q torus dimer model with edge weights
// (a, b, c); requires positive dimensions and weights.
enum BaStatus ba_torus_log_partition(size_t p, size_t q, double a, double b, double c, double *out);

// Closed-form limit height of the unit square's uniform bead model at
// (x, y) in the unit square.
double ba_square_height(double x, double y);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEAD_ATLAS_H */
