#ifndef IVTOMO_H
#define IVTOMO_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The numeric values are part of the ABI.
 */
typedef enum IvtStatus {
  IVT_STATUS_OK = 0,
  IVT_STATUS_CONFIG = 1,
  IVT_STATUS_DOMAIN = 2,
  IVT_STATUS_SPEC = 3,
  IVT_STATUS_NUMERIC_GUARD = 4,
  IVT_STATUS_STABILITY = 5,
  IVT_STATUS_UNDEFINED_METRIC = 6,
  IVT_STATUS_IO = 7,
  IVT_STATUS_JSON = 8,
  IVT_STATUS_NULL_POINTER = 9,
  IVT_STATUS_INVALID_ARGUMENT = 10,
  IVT_STATUS_PANIC = 11,
} IvtStatus;

/**
 * Square image on `[-half_width, half_width]^2`.
 */
typedef struct IvtImage IvtImage;

/**
 * Circular integrals `g(z_i, r_j)` with their acquisition geometry.
 */
typedef struct IvtSinogram IvtSinogram;

/**
 * Error metrics of a reconstruction against a reference image.
 */
typedef struct IvtMetrics {
  double rel_l2;
  double linf;
  double ncc;
} IvtMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *ivt_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *ivt_version(void);

/**
 * Image from `n * n` values.
 *
 * # Safety
 * `values` must point to `n * n` doubles; `out` must be writable.
 */
enum IvtStatus ivt_image_new(size_t n,
                             double half_width,
                             const double *values,
                             struct IvtImage **out);

/**
 * Built-in phantom (`interior`, `walls` or `inclusions`) rendered on an
 * `n * n` grid.
 *
 * # Safety
 * `name` must be a nul-terminated string; `out` must be writable.
 */
enum IvtStatus ivt_phantom_preset(const char *name,
                                  size_t n,
                                  double half_width,
                                  struct IvtImage **out);

/**
 * Phantom from a JSON feature list (`{"support_radius": .., "features": [..]}`).
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum IvtStatus ivt_phantom_from_json(const char *json,
                                     size_t n,
                                     double half_width,
                                     struct IvtImage **out);

/**
 * Side length of the image, 0 for null.
 *
 * # Safety
 * `img` must be null or a live image.
 */
size_t ivt_image_size(const struct IvtImage *img);

/**
 * # Safety
 * `img` must be null or a live image.
 */
double ivt_image_half_width(const struct IvtImage *img);

/**
 * Copies the `n * n` pixel values into `buf`.
 *
 * # Safety
 * `img` must be a live image and `buf` must hold `len` doubles.
 */
enum IvtStatus ivt_image_copy(const struct IvtImage *img, double *buf, size_t len);

/**
 * # Safety
 * `img` must be null or a pointer returned by this library, freed once.
 */
void ivt_image_free(struct IvtImage *img);

/**
 * Sinogram from `n_phi * n_r` values on the geometry `(r0, r1, n_phi, n_r)`.
 *
 * # Safety
 * `values` must point to `n_phi * n_r` doubles; `out` must be writable.
 */
enum IvtStatus ivt_sinogram_new(double r0,
                                double r1,
                                size_t n_phi,
                                size_t n_r,
                                const double *values,
                                struct IvtSinogram **out);

/**
 * Circular integrals of `img` for transducers at radius `r0`, with
 * `n_arc` points per circle.
 *
 * # Safety
 * `img` must be a live image; `out` must be writable.
 */
enum IvtStatus ivt_forward_cmt(const struct IvtImage *img,
                               double r0,
                               double r1,
                               size_t n_phi,
                               size_t n_r,
                               size_t n_arc,
                               struct IvtSinogram **out);

/**
 * Writes `n_phi` and `n_r`; either pointer may be null.
 *
 * # Safety
 * `sino` must be a live sinogram.
 */
enum IvtStatus ivt_sinogram_dims(const struct IvtSinogram *sino, size_t *n_phi, size_t *n_r);

/**
 * # Safety
 * `sino` must be a live sinogram and `buf` must hold `len` doubles.
 */
enum IvtStatus ivt_sinogram_copy(const struct IvtSinogram *sino, double *buf, size_t len);

/**
 * New sinogram with seeded Gaussian noise of relative L2 size `level`.
 *
 * # Safety
 * `sino` must be a live sinogram; `out` must be writable.
 */
enum IvtStatus ivt_sinogram_add_noise(const struct IvtSinogram *sino,
                                      double level,
                                      uint64_t seed,
                                      struct IvtSinogram **out);

/**
 * # Safety
 * `sino` must be null or a pointer returned by this library, freed once.
 */
void ivt_sinogram_free(struct IvtSinogram *sino);

/**
 * Reconstructs an image. `params_json` may be null for the defaults or a
 * JSON object with any of `a`, `m`, `n_horizontal`, `n_vertical`,
 * `margin`, `image_n`, `image_half_width`.
 *
 * # Safety
 * `sino` must be a live sinogram, `params_json` null or nul-terminated,
 * `out` writable.
 */
enum IvtStatus ivt_invert(const struct IvtSinogram *sino,
                          const char *params_json,
                          struct IvtImage **out);

/**
 * # Safety
 * Both images must be live; `out` must be writable.
 */
enum IvtStatus ivt_compare(const struct IvtImage *rec,
                           const struct IvtImage *truth,
                           struct IvtMetrics *out);

/**
 * Runs a whole experiment from a JSON run configuration (the same schema
 * as the command-line `--config` file) and writes its artifacts.
 *
 * # Safety
 * `config_json` must be nul-terminated; `out` may be null.
 */
enum IvtStatus ivt_run_experiment(const char *config_json, struct IvtMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IVTOMO_H */
