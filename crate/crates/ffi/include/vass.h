#ifndef VASS_H
#define VASS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum VassStatus {
  VASS_STATUS_OK = 0,
  VASS_STATUS_NULL_POINTER = 1,
  VASS_STATUS_INVALID_ARGUMENT = 2,
  VASS_STATUS_INVALID_DATA = 3,
  VASS_STATUS_NUMERIC = 4,
  VASS_STATUS_NOT_FOUND = 5,
  VASS_STATUS_IO = 6,
  VASS_STATUS_BUFFER_TOO_SMALL = 7,
  VASS_STATUS_PANIC = 8,
  VASS_STATUS_OTHER = 9,
} VassStatus;

/**
 * Fitted valence/arousal axes for one layer.
 */
typedef struct VassAxes VassAxes;

/**
 * A loaded VATD1 tensor dump.
 */
typedef struct VassDump VassDump;

/**
 * A toy transformer loaded from a dump.
 */
typedef struct VassModel VassModel;

typedef struct VassCircle {
  double center_x;
  double center_y;
  double radius;
  double rmse;
  double nrmse;
  double circularity;
} VassCircle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *vass_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *vass_last_error_message(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum VassStatus vass_dump_open(const char *path, struct VassDump **out);

/**
 * # Safety
 * `dump` must come from [`vass_dump_open`] or be NULL.
 */
void vass_dump_free(struct VassDump *dump);

/**
 * Number of `f32` values in tensor `name`.
 *
 * # Safety
 * Pointers must be valid; `name` NUL-terminated.
 */
enum VassStatus vass_dump_tensor_len(const struct VassDump *dump,
                                     const char *name,
                                     uintptr_t *out_len);

/**
 * Copies tensor `name` into `buf`, which must hold at least its length.
 *
 * # Safety
 * `buf` must be writable for `cap` floats.
 */
enum VassStatus vass_dump_tensor_read(const struct VassDump *dump,
                                      const char *name,
                                      float *buf,
                                      uintptr_t cap);

/**
 * Fits axes at `layer` of an activation dump against a rating CSV, with
 * the grand mean as center. `k = 0` or a negative `lambda` take defaults.
 *
 * # Safety
 * Pointers must be valid; `ratings_path` NUL-terminated.
 */
enum VassStatus vass_axes_fit(const struct VassDump *dump,
                              const char *ratings_path,
                              uintptr_t layer,
                              uintptr_t k,
                              double lambda,
                              struct VassAxes **out);

/**
 * # Safety
 * `axes` must come from [`vass_axes_fit`] or be NULL.
 */
void vass_axes_free(struct VassAxes *axes);

/**
 * Hidden size of the axes, or 0 for a NULL handle.
 *
 * # Safety
 * `axes` must be a live handle or NULL.
 */
uintptr_t vass_axes_hidden(const struct VassAxes *axes);

/**
 * # Safety
 * Output pointers must be writable.
 */
enum VassStatus vass_axes_recovery(const struct VassAxes *axes, double *r_v, double *r_a);

/**
 * Copies the unit valence and arousal directions; `len` must equal the
 * hidden size.
 *
 * # Safety
 * `v_out` and `a_out` must be writable for `len` doubles.
 */
enum VassStatus vass_axes_directions(const struct VassAxes *axes,
                                     double *v_out,
                                     double *a_out,
                                     uintptr_t len);

/**
 * Valence and arousal coordinates of a hidden state.
 *
 * # Safety
 * `h` must be readable for `len` doubles; outputs writable.
 */
enum VassStatus vass_axes_project(const struct VassAxes *axes,
                                  const double *h,
                                  uintptr_t len,
                                  double *valence,
                                  double *arousal);

/**
 * Least-squares circle through `n` points; `refine` adds geometric
 * refinement after the algebraic fit.
 *
 * # Safety
 * `xs` and `ys` must be readable for `n` doubles; `out` writable.
 */
enum VassStatus vass_fit_circle(const double *xs,
                                const double *ys,
                                uintptr_t n,
                                bool refine,
                                struct VassCircle *out);

/**
 * # Safety
 * `dump` must be a live handle and `out` writable.
 */
enum VassStatus vass_model_from_dump(const struct VassDump *dump, struct VassModel **out);

/**
 * # Safety
 * `model` must come from [`vass_model_from_dump`] or be NULL.
 */
void vass_model_free(struct VassModel *model);

/**
 * Hidden size, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
uintptr_t vass_model_hidden(const struct VassModel *model);

/**
 * Layer count, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
uintptr_t vass_model_layers(const struct VassModel *model);

/**
 * Greedy continuation of `prompt`, steered by `alpha` along the unit
 * `direction` at every layer (pass NULL for none). The text is written
 * NUL-terminated; `written` receives its byte length without the NUL.
 * When `cap` is too small, `written` still receives the needed length.
 *
 * # Safety
 * `direction` must be readable for `dir_len` doubles, `buf` writable for
 * `cap` bytes, `written` writable.
 */
enum VassStatus vass_model_generate(const struct VassModel *model,
                                    const char *prompt,
                                    const double *direction,
                                    uintptr_t dir_len,
                                    double alpha,
                                    uintptr_t max_new,
                                    char *buf,
                                    uintptr_t cap,
                                    uintptr_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VASS_H */
