#ifndef MCPAD_H
#define MCPAD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every exported function.
 */
typedef enum McpadStatus {
  MCPAD_STATUS_OK = 0,
  MCPAD_STATUS_NULL_POINTER = 1,
  MCPAD_STATUS_INVALID_ARGUMENT = 2,
  MCPAD_STATUS_SHAPE_MISMATCH = 3,
  MCPAD_STATUS_VALIDATION_FAILED = 4,
  MCPAD_STATUS_MODEL_FORMAT = 5,
  MCPAD_STATUS_IO = 6,
  MCPAD_STATUS_PANIC = 7,
} McpadStatus;

/*
 Loaded detector: per-region autoencoders plus the MLP.
 */
typedef struct McpadSystem McpadSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty when none failed.
 The pointer stays valid until the next failing call on this thread.
 */
const char *mcpad_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *mcpad_version(void);

/*
 Loads `region_XX.mcae` files from `models_dir` and the MLP from
 `mlp_path`. `n_regions` is 1, 9 or 16. Release with [`mcpad_system_free`].

 # Safety
 Paths must be NUL-terminated strings; `out` must be writable.
 */
enum McpadStatus mcpad_system_load(const char *models_dir,
                                   const char *mlp_path,
                                   uint32_t n_regions,
                                   struct McpadSystem **out);

/*
 Frees a system from [`mcpad_system_load`]. Null is ignored.

 # Safety
 `system` must come from [`mcpad_system_load`] and not be used afterwards.
 */
void mcpad_system_free(struct McpadSystem *system);

/*
 Attack probability of one preprocessed face given as three row-major
 128×128 8-bit planes (BW, NIR, depth; or three copies of one plane in
 single-channel mode).

 # Safety
 Each plane must point to 128·128 readable bytes; `score` must be writable.
 */
enum McpadStatus mcpad_system_score(const struct McpadSystem *system,
                                    const uint8_t *bw,
                                    const uint8_t *nir,
                                    const uint8_t *depth,
                                    double *score);

/*
 MAD-normalizes a row-major `width`×`height` plane into 8-bit `out`.

 # Safety
 `values` and `out` must hold `width·height` elements.
 */
enum McpadStatus mcpad_mad_normalize(const double *values,
                                     size_t width,
                                     size_t height,
                                     double sigma,
                                     uint8_t *out);

/*
 Fraction of attack scores below `tau` (classified bona fide).

 # Safety
 `scores` must hold `n` values; `out` must be writable.
 */
enum McpadStatus mcpad_apcer(const double *scores, size_t n, double tau, double *out);

/*
 Fraction of bona-fide scores at or above `tau` (classified attack).

 # Safety
 `scores` must hold `n` values; `out` must be writable.
 */
enum McpadStatus mcpad_bpcer(const double *scores, size_t n, double tau, double *out);

/*
 Largest dev threshold whose APCER does not exceed `target`.
 `is_attack[i]` is nonzero for attack presentations. `attainable` receives
 0 when the fallback threshold was used and may be null.

 # Safety
 `scores` and `is_attack` must hold `n` elements; `tau` must be writable.
 */
enum McpadStatus mcpad_threshold_at_apcer(const double *scores,
                                          const uint8_t *is_attack,
                                          size_t n,
                                          double target,
                                          double *tau,
                                          uint8_t *attainable);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MCPAD_H */
