#ifndef RSC_H
#define RSC_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Curve shapes for [`rsc_handcrafted_qpmap`].
 */
typedef enum RscCurve {
  RSC_CURVE_LINEAR = 0,
  RSC_CURVE_NONLINEAR = 1,
} RscCurve;

typedef enum RscStatus {
  RSC_STATUS_OK = 0,
  RSC_STATUS_NULL_POINTER = 1,
  RSC_STATUS_INVALID_INPUT = 2,
  RSC_STATUS_NOT_FOUND = 3,
  RSC_STATUS_PARSE = 4,
  RSC_STATUS_IO = 5,
  RSC_STATUS_FIT = 6,
  RSC_STATUS_EVAL = 7,
  RSC_STATUS_MODEL = 8,
  RSC_STATUS_BUFFER_TOO_SMALL = 9,
  RSC_STATUS_PANIC = 10,
} RscStatus;

typedef struct RscEncoding RscEncoding;

typedef struct RscFrame RscFrame;

typedef struct RscModel RscModel;

typedef struct RscBdResult {
  /**
   * Percent.
   */
  double bd_br;
  double bd_metric;
} RscBdResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `capacity`). Returns the full message length
 * excluding the terminator; 0 when the last call succeeded.
 *
 * # Safety
 * `buf` must be null or valid for `capacity` bytes.
 */
size_t rsc_last_error(char *buf, size_t capacity);

double rsc_qp_to_lambda(double qp);

/**
 * Builds a frame from 8-bit luma in raster order.
 *
 * # Safety
 * `luma` must be valid for `len` bytes; `out` must be writable.
 */
enum RscStatus rsc_frame_new(size_t width,
                             size_t height,
                             const uint8_t *luma,
                             size_t len,
                             struct RscFrame **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RscStatus rsc_frame_read_pgm(const char *path, struct RscFrame **out);

/**
 * # Safety
 * `frame` must come from this library; `path` must be NUL terminated.
 */
enum RscStatus rsc_frame_write_pgm(const struct RscFrame *frame, const char *path);

/**
 * # Safety
 * `frame` must be null or a handle from this library, not yet freed.
 */
void rsc_frame_free(struct RscFrame *frame);

/**
 * # Safety
 * `frame` must be null or a live handle.
 */
size_t rsc_frame_width(const struct RscFrame *frame);

/**
 * # Safety
 * `frame` must be null or a live handle.
 */
size_t rsc_frame_height(const struct RscFrame *frame);

/**
 * Number of 64×64 coding units, i.e. the length of a QP map.
 *
 * # Safety
 * `frame` must be null or a live handle.
 */
size_t rsc_frame_cu_count(const struct RscFrame *frame);

/**
 * Copies the luma plane into `out`.
 *
 * # Safety
 * `frame` must be a live handle; `out` valid for `capacity` bytes.
 */
enum RscStatus rsc_frame_luma(const struct RscFrame *frame, uint8_t *out, size_t capacity);

/**
 * Encodes with one QP per coding unit, raster order.
 *
 * # Safety
 * `frame` must be a live handle; `qps` valid for `len` bytes; `out`
 * writable.
 */
enum RscStatus rsc_encode(const struct RscFrame *frame,
                          const uint8_t *qps,
                          size_t len,
                          struct RscEncoding **out);

/**
 * # Safety
 * `encoding` must be null or a live handle.
 */
double rsc_encoding_bpp(const struct RscEncoding *encoding);

/**
 * # Safety
 * `encoding` must be null or a live handle.
 */
double rsc_encoding_total_bits(const struct RscEncoding *encoding);

/**
 * New frame handle holding a copy of the reconstruction.
 *
 * # Safety
 * `encoding` must be a live handle; `out` writable.
 */
enum RscStatus rsc_encoding_reconstruction(const struct RscEncoding *encoding,
                                           struct RscFrame **out);

/**
 * # Safety
 * `encoding` must be null or a live handle, not yet freed.
 */
void rsc_encoding_free(struct RscEncoding *encoding);

/**
 * # Safety
 * `path` must be NUL terminated; `out` writable.
 */
enum RscStatus rsc_model_load(const char *path, struct RscModel **out);

/**
 * # Safety
 * `model` must be null or a live handle, not yet freed.
 */
void rsc_model_free(struct RscModel *model);

/**
 * The α the model was trained with; NaN for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
double rsc_model_alpha(const struct RscModel *model);

/**
 * Greedy QP map for `frame` under the proxy oracle. `*out_len` is set to
 * the CU count even when `capacity` is too small.
 *
 * # Safety
 * Handles must be live; `out` valid for `capacity` bytes; `out_len`
 * writable.
 */
enum RscStatus rsc_model_qpmap(const struct RscModel *model,
                               const struct RscFrame *frame,
                               uint8_t *out,
                               size_t capacity,
                               size_t *out_len);

/**
 * QP map from the importance-to-QP mapping curve under the proxy oracle.
 *
 * # Safety
 * `frame` must be live; `out` valid for `capacity` bytes; `out_len`
 * writable.
 */
enum RscStatus rsc_handcrafted_qpmap(const struct RscFrame *frame,
                                     enum RscCurve curve,
                                     uint8_t *out,
                                     size_t capacity,
                                     size_t *out_len);

/**
 * Bjontegaard deltas of a test curve against an anchor; each curve is
 * given as parallel rate and metric arrays.
 *
 * # Safety
 * Arrays must be valid for their lengths; `out` writable.
 */
enum RscStatus rsc_bd_rate(const double *test_rates,
                           const double *test_metrics,
                           size_t test_len,
                           const double *anchor_rates,
                           const double *anchor_metrics,
                           size_t anchor_len,
                           struct RscBdResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSC_H */
