#ifndef DCTMARS_H
#define DCTMARS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>

// Retained-coefficient window shape.
typedef enum DmShape {
  DM_SHAPE_SQUARE = 0,
  DM_SHAPE_TRIANGLE = 1,
} DmShape;

// Result codes.
typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  DM_STATUS_INVALID_ARGUMENT = 2,
  DM_STATUS_IO = 3,
  DM_STATUS_PARSE = 4,
  DM_STATUS_NUMERICAL = 5,
  DM_STATUS_PANIC = 6,
} DmStatus;

// Opaque fitted emulator loaded from a snapshot file.
typedef struct DmModel DmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *dm_last_error_message(void);

// Number of retained coefficients for a selection.
size_t dm_selection_len(enum DmShape shape, size_t size);

// Orthonormal 2-D DCT-II of a row-major field into a row-major
// `rows x cols` coefficient buffer.
//
// # Safety
// `field` and `coeffs_out` must each hold `rows * cols` values.
enum DmStatus dm_dct2_forward(const double *field, size_t rows, size_t cols, double *coeffs_out);

// Inverse of [`dm_dct2_forward`].
//
// # Safety
// `coeffs` and `field_out` must each hold `rows * cols` values.
enum DmStatus dm_dct2_inverse(const double *coeffs, size_t rows, size_t cols, double *field_out);

// Field from the retained coefficients `theta` (zig-zag order).
//
// # Safety
// `theta` must hold `dm_selection_len(shape, size)` values and `field_out`
// `rows * cols` values.
enum DmStatus dm_reconstruct(const double *theta,
                             enum DmShape shape,
                             size_t size,
                             size_t rows,
                             size_t cols,
                             double *field_out);

// Loads a snapshot written by `dctmars fit` or `dctmars calibrate`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer. On
// success `*out` owns a model that must be released with [`dm_model_free`].
enum DmStatus dm_model_load(const char *path, struct DmModel **out);

// Releases a model. Null is accepted.
//
// # Safety
// `model` must be null or a pointer from [`dm_model_load`] not yet freed.
void dm_model_free(struct DmModel *model);

// Number of raw inputs per prediction row (known inputs then coefficients).
//
// # Safety
// `model` must be null or a live model.
size_t dm_model_n_inputs(const struct DmModel *model);

// Number of stored posterior draws.
//
// # Safety
// `model` must be null or a live model.
size_t dm_model_n_draws(const struct DmModel *model);

// Posterior mean and central interval of the emulator (transformed scale)
// at `n_rows` row-major input rows of width [`dm_model_n_inputs`].
// `lower_out` and `upper_out` may be null when only the mean is wanted.
//
// # Safety
// `x` must hold `n_rows * n_inputs` values; each non-null output buffer
// `n_rows` values.
enum DmStatus dm_model_predict(const struct DmModel *model,
                               const double *x,
                               size_t n_rows,
                               double level,
                               double *mean_out,
                               double *lower_out,
                               double *upper_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCTMARS_H */
