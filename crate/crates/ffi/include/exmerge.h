#ifndef EXMERGE_H
#define EXMERGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every `exm_*` call.
typedef enum {
  EXM_STATUS_OK = 0,
  EXM_STATUS_NULL_POINTER = 1,
  EXM_STATUS_INVALID_ARGUMENT = 2,
  EXM_STATUS_SCHEMA_ERROR = 3,
  EXM_STATUS_INVARIANT_ERROR = 4,
  EXM_STATUS_IO_ERROR = 5,
  EXM_STATUS_UNSUPPORTED_FORMAT = 6,
  EXM_STATUS_DECODE_ERROR = 7,
  EXM_STATUS_DIMENSION_MISMATCH = 8,
  EXM_STATUS_PIPELINE_ERROR = 9,
  EXM_STATUS_PANIC = 10,
} ExmStatus;

// Background plus the layers added so far, bottom first.
typedef struct ExmComposite ExmComposite;

// Parsed annotation document.
typedef struct ExmDocument ExmDocument;

// RGB8 raster.
typedef struct ExmImage ExmImage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *exm_version(void);

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the length the full message needs including
// the terminator, or 0 when there is no error.
//
// # Safety
// `buf` must be null or point to at least `len` writable bytes.
size_t exm_last_error_message(char *buf, size_t len);

// Parses an interchange document from `len` bytes of UTF-8 JSON.
//
// # Safety
// `bytes` must point to `len` readable bytes; `out` must be writable.
ExmStatus exm_document_parse(const uint8_t *bytes, size_t len, ExmDocument **out);

// # Safety
// `doc` must be null or a handle from [`exm_document_parse`] not yet freed.
void exm_document_free(ExmDocument *doc);

// # Safety
// `doc` must be a live document handle or null (yields 0).
size_t exm_document_instance_count(const ExmDocument *doc);

// Number of non-fatal findings (e.g. mask pixels outside the box) from parsing.
//
// # Safety
// `doc` must be a live document handle or null (yields 0).
size_t exm_document_warning_count(const ExmDocument *doc);

// Image size declared by the document.
//
// # Safety
// `doc` must be a live handle; `width` and `height` must be writable.
ExmStatus exm_document_size(const ExmDocument *doc, uint32_t *width, uint32_t *height);

// Writes `[y1, x1, y2, x2]` of instance `index` to `bbox_out`.
//
// # Safety
// `doc` must be a live handle; `bbox_out` must hold 4 writable `uint32_t`.
ExmStatus exm_document_instance_bbox(const ExmDocument *doc, size_t index, uint32_t *bbox_out);

// Serializes the document to JSON. Free the result with [`exm_bytes_free`].
//
// # Safety
// `doc` must be a live handle; `out` and `out_len` must be writable.
ExmStatus exm_document_serialize(const ExmDocument *doc, uint8_t **out, size_t *out_len);

// # Safety
// `bytes`/`len` must come from [`exm_document_serialize`] or be null.
void exm_bytes_free(uint8_t *bytes, size_t len);

// Decodes column-major COCO run lengths into `bits_out`, one byte (0 or 1) per
// pixel in row-major order.
//
// # Safety
// `counts` must hold `n_counts` values; `bits_out` must hold `height * width` bytes.
ExmStatus exm_rle_decode(uint32_t height,
                         uint32_t width,
                         const uint32_t *counts,
                         size_t n_counts,
                         uint8_t *bits_out);

// Encodes a row-major mask (nonzero byte = set) as canonical column-major run
// lengths. Free the result with [`exm_counts_free`].
//
// # Safety
// `bits` must hold `height * width` bytes; `out` and `out_len` must be writable.
ExmStatus exm_rle_encode(uint32_t height,
                         uint32_t width,
                         const uint8_t *bits,
                         uint32_t **out,
                         size_t *out_len);

// # Safety
// `counts`/`len` must come from [`exm_rle_encode`] or be null.
void exm_counts_free(uint32_t *counts, size_t len);

// Copies `width * height * 3` bytes of row-major RGB into a new image.
//
// # Safety
// `rgb` must hold `width * height * 3` bytes; `out` must be writable.
ExmStatus exm_image_new(uint32_t width, uint32_t height, const uint8_t *rgb, ExmImage **out);

// Loads a PNG or JPEG; alpha is flattened over black.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
ExmStatus exm_image_load(const char *path, ExmImage **out);

// # Safety
// `image` must be a live handle; `path` a NUL-terminated UTF-8 string.
ExmStatus exm_image_save_png(const ExmImage *image, const char *path);

// Bilinear resize into a new image.
//
// # Safety
// `image` must be a live handle; `out` must be writable.
ExmStatus exm_image_resize(const ExmImage *image, uint32_t width, uint32_t height, ExmImage **out);

// # Safety
// `image` must be a live handle or null (yields 0).
uint32_t exm_image_width(const ExmImage *image);

// # Safety
// `image` must be a live handle or null (yields 0).
uint32_t exm_image_height(const ExmImage *image);

// Borrowed pointer to `width * height * 3` RGB bytes, valid until the image is freed.
//
// # Safety
// `image` must be a live handle or null (yields null).
const uint8_t *exm_image_data(const ExmImage *image);

// # Safety
// `image` must be null or a live handle not yet freed.
void exm_image_free(ExmImage *image);

// Starts a composite over a copy of `background`; its size is the canvas.
//
// # Safety
// `background` must be a live image handle; `out` must be writable.
ExmStatus exm_composite_new(const ExmImage *background, ExmComposite **out);

// Adds a layer on top: the `count` largest persons of `doc` scoring at least
// `min_score` (`count` 0 selects all), resized to the canvas.
//
// # Safety
// All handles must be live.
ExmStatus exm_composite_add_layer(ExmComposite *job,
                                  const ExmImage *image,
                                  const ExmDocument *doc,
                                  uint32_t count,
                                  double min_score);

// # Safety
// `job` must be a live handle or null (yields 0).
size_t exm_composite_layer_count(const ExmComposite *job);

// Total instances placed across all layers.
//
// # Safety
// `job` must be a live handle or null (yields 0).
size_t exm_composite_instance_count(const ExmComposite *job);

// Renders the layers over the background into a new image.
//
// # Safety
// `job` must be a live handle; `out` must be writable.
ExmStatus exm_composite_render(const ExmComposite *job, ExmImage **out);

// # Safety
// `job` must be null or a live handle not yet freed.
void exm_composite_free(ExmComposite *job);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXMERGE_H */
