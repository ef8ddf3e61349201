#ifndef SVCTUNE_H
#define SVCTUNE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum {
  SVCTUNE_OK = 0,
  SVCTUNE_NULL_ARGUMENT = 1,
  SVCTUNE_IO_ERROR = 2,
  SVCTUNE_PARSE_ERROR = 3,
  SVCTUNE_BAD_SPLIT = 4,
  SVCTUNE_BAD_CONFIG = 5,
  SVCTUNE_SOLVER_FAILURE = 6,
  SVCTUNE_NO_CONVERGENCE = 7,
  SVCTUNE_BUFFER_TOO_SMALL = 8,
  SVCTUNE_PANIC = 9,
} svctune_status_t;

/**
 * Opaque dataset handle.
 */
typedef struct svctune_dataset_t svctune_dataset_t;

/**
 * Opaque tuning-result handle.
 */
typedef struct svctune_result_t svctune_result_t;

/**
 * Solver options mirrored as a plain C struct. Zeroed fields fall back to
 * the library defaults via [`svctune_options_default`].
 */
typedef struct {
  size_t folds;
  /**
   * Size of the cross-validation pool; 0 means 3/4 of the dataset.
   */
  size_t train_size;
  uint64_t seed;
  double tol;
  size_t max_outer;
  /**
   * 0 = implicit (matrix-free), 1 = explicit (assembled) Jacobian.
   */
  int explicit_jacobian;
  double kappa;
  double tau;
} svctune_options_t;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Human-readable description of a status code. Static storage; do not free.
 */
const char *svctune_status_message(svctune_status_t status);

/**
 * Library version as a NUL-terminated string owned by the caller; release
 * with [`svctune_string_free`].
 */
char *svctune_version(void);

void svctune_string_free(char *s);

/**
 * Parses a LIBSVM-format file into a dataset handle.
 */
svctune_status_t svctune_dataset_load(const char *path, svctune_dataset_t **out);

void svctune_dataset_free(svctune_dataset_t *ds);

size_t svctune_dataset_len(const svctune_dataset_t *ds);

size_t svctune_dataset_features(const svctune_dataset_t *ds);

svctune_options_t svctune_options_default(void);

/**
 * Runs the smoothing Newton tuning pipeline. On success `*out` holds a
 * result handle; `SVCTUNE_NO_CONVERGENCE` still produces a handle with
 * the best iterate found.
 */
svctune_status_t svctune_tune(const svctune_dataset_t *ds,
                              const svctune_options_t *opts,
                              svctune_result_t **out);

/**
 * Runs the grid-search pipeline over the standard 18-point grid, or over
 * `grid[0..grid_len]` when a grid is supplied.
 */
svctune_status_t svctune_grid(const svctune_dataset_t *ds,
                              const svctune_options_t *opts,
                              const double *grid,
                              size_t grid_len,
                              svctune_result_t **out);

void svctune_result_free(svctune_result_t *res);

double svctune_result_c_star(const svctune_result_t *res);

double svctune_result_c_hat(const svctune_result_t *res);

double svctune_result_test_error(const svctune_result_t *res);

double svctune_result_cv_error(const svctune_result_t *res);

size_t svctune_result_outer_iters(const svctune_result_t *res);

double svctune_result_z_star(const svctune_result_t *res);

/**
 * Number of entries in the final classifier.
 */
size_t svctune_result_w_len(const svctune_result_t *res);

/**
 * Copies the final classifier into `buf`; fails when `buf_len` is short.
 */
svctune_status_t svctune_result_w_hat(const svctune_result_t *res, double *buf, size_t buf_len);

/**
 * Serializes the full result (report, trace, diagnostics) to JSON; owned
 * by the caller, release with [`svctune_string_free`].
 */
char *svctune_result_to_json(const svctune_result_t *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SVCTUNE_H */
