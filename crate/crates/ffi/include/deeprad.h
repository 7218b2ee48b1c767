#ifndef DEEPRAD_H
#define DEEPRAD_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DrStatus {
  DR_STATUS_OK = 0,
  DR_STATUS_NULL_POINTER = 1,
  DR_STATUS_INVALID_ARGUMENT = 2,
  DR_STATUS_FORMAT = 3,
  DR_STATUS_IO = 4,
  DR_STATUS_SHAPE = 5,
  DR_STATUS_REGION = 6,
  DR_STATUS_WEIGHT = 7,
  DR_STATUS_DEGENERATE_SPLIT = 8,
  DR_STATUS_JOIN = 9,
  DR_STATUS_TRAINING = 10,
  DR_STATUS_PANIC = 11,
} DrStatus;

/**
 * Opaque region-of-interest mask.
 */
typedef struct DrMask DrMask;

/**
 * Opaque intensity volume.
 */
typedef struct DrVolume DrVolume;

/**
 * Opaque convolutional weights.
 */
typedef struct DrWeights DrWeights;

typedef struct DrLogRank {
  double chi2;
  double p_value;
  /**
   * 0 when the hazard ratio is undefined; the three fields below are then NaN.
   */
  uint8_t has_hazard;
  double hazard_ratio;
  double ci_low;
  double ci_high;
} DrLogRank;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library on the same thread.
 */
const char *dr_last_error(void);

/**
 * Number of descriptor entries per feature vector.
 */
size_t dr_feature_count(void);

/**
 * Static, NUL-terminated name of feature `index`, or NULL when out of range.
 */
const char *dr_feature_name(size_t index);

/**
 * Copies `nx*ny*nz` floats (x fastest) into a new volume.
 *
 * # Safety
 * `spacing` points to 3 doubles, `data` to `nx*ny*nz` floats, `out` is writable.
 */
enum DrStatus dr_volume_new(size_t nx,
                            size_t ny,
                            size_t nz,
                            const double *spacing,
                            const float *data,
                            struct DrVolume **out);

/**
 * Reads a NIfTI-1 file, or a raw volume when the name ends in `.rawvol`.
 *
 * # Safety
 * `path` is a NUL-terminated string and `out` is writable.
 */
enum DrStatus dr_volume_read(const char *path, struct DrVolume **out);

/**
 * Writes the volume dims into `dims[0..3]`.
 *
 * # Safety
 * `vol` is a live handle and `dims` points to 3 writable `size_t`.
 */
enum DrStatus dr_volume_dims(const struct DrVolume *vol, size_t *dims);

/**
 * # Safety
 * `vol` is NULL or a handle from this library not yet freed.
 */
void dr_volume_free(struct DrVolume *vol);

/**
 * Nonzero bytes mark ROI voxels.
 *
 * # Safety
 * `bits` points to `nx*ny*nz` bytes and `out` is writable.
 */
enum DrStatus dr_mask_new(size_t nx,
                          size_t ny,
                          size_t nz,
                          const uint8_t *bits,
                          struct DrMask **out);

/**
 * # Safety
 * `path` is a NUL-terminated string and `out` is writable.
 */
enum DrStatus dr_mask_read(const char *path, struct DrMask **out);

/**
 * # Safety
 * `mask` is NULL or a handle from this library not yet freed.
 */
void dr_mask_free(struct DrMask *mask);

/**
 * Deterministic Glorot-uniform weights for the default network.
 *
 * # Safety
 * `out` is writable.
 */
enum DrStatus dr_weights_seeded(uint64_t seed, struct DrWeights **out);

/**
 * # Safety
 * `path` is a NUL-terminated string and `out` is writable.
 */
enum DrStatus dr_weights_load(const char *path, struct DrWeights **out);

/**
 * # Safety
 * `weights` is NULL or a handle from this library not yet freed.
 */
void dr_weights_free(struct DrWeights *weights);

/**
 * 41-entry descriptor of the masked region of `vol`.
 *
 * # Safety
 * Handles are live and `out` points to 41 writable doubles.
 */
enum DrStatus dr_feature_vector(const struct DrVolume *vol,
                                const struct DrMask *mask,
                                size_t levels,
                                double *out);

/**
 * SRF and DRF of an already preprocessed, masked volume whose dims suit
 * the default network. Either output may be NULL.
 *
 * # Safety
 * Handles are live; non-NULL outputs point to 41 writable doubles.
 */
enum DrStatus dr_patient_features(const struct DrVolume *vol,
                                  const struct DrMask *mask,
                                  const struct DrWeights *weights,
                                  size_t levels,
                                  double *srf_out,
                                  double *drf_out);

/**
 * Two-group log-rank test; `events` bytes are 1 for death, 0 for censored.
 *
 * # Safety
 * Arrays hold `n_a` / `n_b` entries and `out` is writable.
 */
enum DrStatus dr_logrank(const double *times_a,
                         const uint8_t *events_a,
                         size_t n_a,
                         const double *times_b,
                         const uint8_t *events_b,
                         size_t n_b,
                         struct DrLogRank *out);

/**
 * Holm-adjusted p-values, in input order.
 *
 * # Safety
 * `p` and `out` hold `n` doubles; they may alias.
 */
enum DrStatus dr_holm(const double *p, size_t n, double *out);

/**
 * ROC AUC of `scores` against 0/1 `labels`.
 *
 * # Safety
 * `scores` and `labels` hold `n` entries and `out` is writable.
 */
enum DrStatus dr_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DEEPRAD_H */
