#ifndef CMVC_H
#define CMVC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum CmvcStatus {
  CMVC_STATUS_OK = 0,
  CMVC_STATUS_NULL_ARGUMENT = 1,
  CMVC_STATUS_INVALID_ARGUMENT = 2,
  CMVC_STATUS_MALFORMED_INPUT = 3,
  CMVC_STATUS_TOO_SHORT = 4,
  CMVC_STATUS_CONTRACT = 5,
  CMVC_STATUS_MALFORMED_PAYLOAD = 6,
  CMVC_STATUS_UNSUPPORTED_STREAM = 7,
  CMVC_STATUS_CORRUPT_STREAM = 8,
  CMVC_STATUS_MALFORMED_STREAM = 9,
  CMVC_STATUS_NO_OVERLAP = 10,
  CMVC_STATUS_BACKEND_UNAVAILABLE = 11,
  CMVC_STATUS_PROTOCOL_VIOLATION = 12,
  CMVC_STATUS_NUMERICAL_FAILURE = 13,
  CMVC_STATUS_IO = 14,
  CMVC_STATUS_BUFFER_TOO_SMALL = 15,
  CMVC_STATUS_PANIC = 16,
} CmvcStatus;

// An owned byte array, e.g. an encoded stream. Opaque.
typedef struct CmvcBuffer CmvcBuffer;

// A decoded or loaded video. Opaque.
typedef struct CmvcVideo CmvcVideo;

// Encoder settings. Start from [`cmvc_encode_options_default`].
typedef struct CmvcEncodeOptions {
  // 0 = text only (TT2V), 1 = image + text (IT2V).
  uint8_t mode;
  uint32_t n_keyframes;
  // 0 = cosine, 1 = mse, 2 = uniform, 3 = random.
  uint8_t strategy;
  // 64, 128 or 256.
  uint32_t quality;
  // Nonzero fits and transmits per-frame generation weights.
  uint8_t optimize;
  uint32_t training_steps;
  double learning_rate;
  uint64_t seed;
  // Worker threads; 0 = all cores.
  uint32_t jobs;
} CmvcEncodeOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL after a
// success. Owned by the library.
const char *cmvc_last_error(void);

// Library version as a static string.
const char *cmvc_version(void);

struct CmvcEncodeOptions cmvc_encode_options_default(void);

// Wraps raw planar 8-bit samples (frame, then plane, then row order).
//
// # Safety
// `data` must point to `len` readable bytes; `out` must be writable.
enum CmvcStatus cmvc_video_from_bytes(const uint8_t *data,
                                      size_t len,
                                      uint32_t width,
                                      uint32_t height,
                                      uint32_t planes,
                                      uint32_t fps_num,
                                      uint32_t fps_den,
                                      struct CmvcVideo **out);

// Reads a headerless raw video file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CmvcStatus cmvc_video_load(const char *path,
                                uint32_t width,
                                uint32_t height,
                                uint32_t planes,
                                uint32_t fps_num,
                                uint32_t fps_den,
                                struct CmvcVideo **out);

// # Safety
// `video` must come from this library and not be used afterwards. NULL is ignored.
void cmvc_video_free(struct CmvcVideo *video);

// Frame count, or 0 for NULL.
//
// # Safety
// `video` must be NULL or a live handle.
size_t cmvc_video_frame_count(const struct CmvcVideo *video);

// Writes width, height and planes; any out-pointer may be NULL.
//
// # Safety
// `video` must be a live handle; non-NULL out-pointers must be writable.
enum CmvcStatus cmvc_video_geometry(const struct CmvcVideo *video,
                                    uint32_t *width,
                                    uint32_t *height,
                                    uint32_t *planes);

// Copies the samples out in raw file order.
//
// # Safety
// `video` must be a live handle; `out` must be writable.
enum CmvcStatus cmvc_video_to_bytes(const struct CmvcVideo *video, struct CmvcBuffer **out);

// # Safety
// `buffer` must be NULL or a live handle.
const uint8_t *cmvc_buffer_data(const struct CmvcBuffer *buffer);

// # Safety
// `buffer` must be NULL or a live handle.
size_t cmvc_buffer_len(const struct CmvcBuffer *buffer);

// # Safety
// `buffer` must come from this library and not be used afterwards. NULL is ignored.
void cmvc_buffer_free(struct CmvcBuffer *buffer);

// Selects `n` keyframes into `indices[0..n]`; `capacity` must be at least `n`.
//
// # Safety
// `video` must be a live handle; `indices` must hold `capacity` writable entries.
enum CmvcStatus cmvc_select_keyframes(const struct CmvcVideo *video,
                                      uint32_t n,
                                      uint8_t strategy_code,
                                      uint64_t seed,
                                      size_t *indices,
                                      size_t capacity);

// Encodes `video` into a `.cmvc` stream.
//
// `backend` (`"linear"`, `"latent[:m]"`, `"external:<cmd>"`) and
// `text_sidecar` (sidecar file contents) may be NULL.
//
// # Safety
// Pointers must be valid as described; `out` must be writable.
enum CmvcStatus cmvc_encode(const struct CmvcVideo *video,
                            const struct CmvcEncodeOptions *options,
                            const char *backend,
                            const char *text_sidecar,
                            struct CmvcBuffer **out);

// Decodes a `.cmvc` stream. `backend` may be NULL (linear).
//
// # Safety
// `data` must point to `len` readable bytes; `out` must be writable.
enum CmvcStatus cmvc_decode(const uint8_t *data,
                            size_t len,
                            const char *backend,
                            uint32_t jobs,
                            struct CmvcVideo **out);

// PSNR in dB; identical videos give +infinity.
//
// # Safety
// `a` and `b` must be live handles; `out` must be writable.
enum CmvcStatus cmvc_psnr(const struct CmvcVideo *a, const struct CmvcVideo *b, double *out);

// BD-rate (percent) of the test curve against the anchor curve. Each curve
// is given as parallel rate (bits per pixel) and distortion arrays.
//
// # Safety
// Each array must hold its stated number of readable entries; `out` must be writable.
enum CmvcStatus cmvc_bd_rate(const double *anchor_rates,
                             const double *anchor_distortions,
                             size_t anchor_len,
                             const double *test_rates,
                             const double *test_distortions,
                             size_t test_len,
                             uint8_t higher_better,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMVC_H */
