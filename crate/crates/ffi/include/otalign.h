/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef OTALIGN_H
#define OTALIGN_H

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every call. Numeric values of the first four match the CLI
 * exit codes.
 */
typedef enum OtaStatus {
  OTA_STATUS_OK = 0,
  OTA_STATUS_INVALID = 1,
  OTA_STATUS_IO = 2,
  OTA_STATUS_NOT_CONVERGED = 3,
  OTA_STATUS_NULL_POINTER = 4,
  OTA_STATUS_PANIC = 5,
} OtaStatus;

/**
 * Opaque embedding sequence.
 */
typedef struct OtaSequence OtaSequence;

/**
 * Solver and projection settings. Obtain defaults from [`ota_config_default`].
 */
typedef struct OtaConfig {
  double epsilon;
  size_t max_iters;
  double tolerance;
  size_t k;
  /**
   * Nonzero selects the full barycentric map instead of top-k.
   */
  uint8_t full_projection;
} OtaConfig;

/**
 * Sinkhorn outcome reported by [`ota_align`].
 */
typedef struct OtaDiagnostics {
  size_t iterations_used;
  double final_violation;
  uint8_t converged;
} OtaDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ota_version(void);

/**
 * Message for the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call on the same thread.
 */
const char *ota_last_error_message(void);

struct OtaConfig ota_config_default(void);

/**
 * Copies `frames * dim` row-major values into a new sequence.
 *
 * # Safety
 * `data` must point to `frames * dim` readable floats and `out` must be
 * writable.
 */
enum OtaStatus ota_sequence_from_f32(const float *data,
                                     size_t frames,
                                     size_t dim,
                                     struct OtaSequence **out);

/**
 * Loads an EMB1 file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum OtaStatus ota_sequence_read(const char *path, struct OtaSequence **out);

/**
 * Writes an EMB1 file atomically.
 *
 * # Safety
 * `seq` must be a live handle and `path` a NUL-terminated string.
 */
enum OtaStatus ota_sequence_write(const struct OtaSequence *seq, const char *path);

/**
 * Number of frames, or 0 for a null handle.
 *
 * # Safety
 * `seq` must be null or a live handle.
 */
size_t ota_sequence_frames(const struct OtaSequence *seq);

/**
 * Frame dimension, or 0 for a null handle.
 *
 * # Safety
 * `seq` must be null or a live handle.
 */
size_t ota_sequence_dim(const struct OtaSequence *seq);

/**
 * Copies the values, row-major, into `buf` of capacity `len` floats.
 *
 * # Safety
 * `seq` must be a live handle and `buf` writable for `len` floats.
 */
enum OtaStatus ota_sequence_copy_f32(const struct OtaSequence *seq, float *buf, size_t len);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `seq` must be null or a handle not yet freed.
 */
void ota_sequence_free(struct OtaSequence *seq);

/**
 * Transports `source` onto the concatenation of `pool[0..pool_len]` (in the
 * given order). On success or `NotConverged`, `*out` receives a new handle
 * and `diagnostics`, if non-null, is filled.
 *
 * # Safety
 * All handles must be live, `pool` must hold `pool_len` handles, `config`
 * may be null for defaults, and `out` must be writable.
 */
enum OtaStatus ota_align(const struct OtaSequence *source,
                         const struct OtaSequence *const *pool,
                         size_t pool_len,
                         const struct OtaConfig *config,
                         struct OtaSequence **out,
                         struct OtaDiagnostics *diagnostics);

/**
 * Equal error rate of `n` trials. `labels[i]` is nonzero for bona fide.
 *
 * # Safety
 * `labels` and `scores` must hold `n` entries; outputs must be writable.
 */
enum OtaStatus ota_eer(const uint8_t *labels,
                       const double *scores,
                       size_t n,
                       double *out_rate,
                       double *out_threshold);

/**
 * Fréchet distance between the Gaussian fits of two sequences.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum OtaStatus ota_fad(const struct OtaSequence *a, const struct OtaSequence *b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTALIGN_H */
