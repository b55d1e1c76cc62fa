#ifndef SELD_RT_H
#define SELD_RT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SeldStatus {
  SELD_STATUS_OK = 0,
  SELD_STATUS_NULL_POINTER = 1,
  SELD_STATUS_INVALID_ARGUMENT = 2,
  SELD_STATUS_PARSE = 3,
  SELD_STATUS_IO = 4,
  SELD_STATUS_SHAPE_MISMATCH = 5,
  SELD_STATUS_BACKEND = 6,
  SELD_STATUS_PANIC = 7,
} SeldStatus;

// Feature set selector. Values match the container kind codes.
typedef enum SeldFeatureKind {
  SELD_FEATURE_KIND_MEL_GCC = 0,
  SELD_FEATURE_KIND_SALSA_LITE = 1,
  SELD_FEATURE_KIND_SALSA_MEL = 2,
} SeldFeatureKind;

// Opaque list of decoded events.
typedef struct SeldEventList SeldEventList;

// Opaque feature extractor.
typedef struct SeldExtractor SeldExtractor;

// Opaque `C x T x B` feature tensor.
typedef struct SeldTensor SeldTensor;

// One decoded event. `x`, `y`, `z` form a unit vector.
typedef struct SeldEvent {
  size_t frame;
  size_t class_id;
  double x;
  double y;
  double z;
  double azimuth_deg;
  double elevation_deg;
  double activity;
} SeldEvent;

// Per-window latency accounting, in seconds.
typedef struct SeldLatencyReport {
  double feature_s;
  double inference_s;
  double budget_s;
  double excess_s;
  bool overrun;
} SeldLatencyReport;

// Macro-averaged scores.
typedef struct SeldMetrics {
  double er;
  double f1;
  double le_deg;
  double lr;
  double e_seld;
} SeldMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next call into the library from the same thread.
const char *seld_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *seld_version(void);

// Extractor with the default settings (24 kHz, 512-point FFT, hop 300,
// 128 mel bands, 191 NIPD bins, 4-mic tetrahedral array).
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum SeldStatus seld_extractor_new(struct SeldExtractor **out);

// Extractor built from a JSON configuration document. Missing fields take
// their defaults.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum SeldStatus seld_extractor_from_json(const char *json, struct SeldExtractor **out);

// # Safety
// `extractor` must come from `seld_extractor_new*` and not be used afterwards.
void seld_extractor_free(struct SeldExtractor *extractor);

// Extracts features from `num_frames` interleaved frames of `num_channels`
// samples each.
//
// # Safety
// `interleaved` must hold `num_frames * num_channels` floats; `out` must be
// a valid pointer.
enum SeldStatus seld_extract(const struct SeldExtractor *extractor,
                             enum SeldFeatureKind kind,
                             const float *interleaved,
                             size_t num_frames,
                             size_t num_channels,
                             uint32_t sample_rate_hz,
                             struct SeldTensor **out);

// # Safety
// `tensor` must be valid; each non-null out pointer must be writable.
enum SeldStatus seld_tensor_shape(const struct SeldTensor *tensor,
                                  size_t *channels,
                                  size_t *frames,
                                  size_t *bins);

// # Safety
// `tensor` and `kind` must be valid pointers.
enum SeldStatus seld_tensor_kind(const struct SeldTensor *tensor, enum SeldFeatureKind *kind);

// Copies the tensor, channel-major then frame then bin, into `dst`, which
// must hold at least `C*T*B` floats (`capacity`).
//
// # Safety
// `dst` must be writable for `capacity` floats.
enum SeldStatus seld_tensor_copy(const struct SeldTensor *tensor, float *dst, size_t capacity);

// Writes the tensor as a binary feature container.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string.
enum SeldStatus seld_tensor_write(const struct SeldTensor *tensor, const char *path);

// # Safety
// `tensor` must come from `seld_extract` and not be used afterwards.
void seld_tensor_free(struct SeldTensor *tensor);

// Decodes a multi-ACCDOA output laid out as `[frame][track][class][xyz]`.
//
// # Safety
// `values` must hold `frames * tracks * classes * 3` doubles.
enum SeldStatus seld_decode(const double *values,
                            size_t frames,
                            size_t tracks,
                            size_t classes,
                            double frame_seconds,
                            double threshold,
                            double merge_angle_deg,
                            struct SeldEventList **out);

// Number of events in the list; 0 for NULL.
//
// # Safety
// `list` must be NULL or valid.
size_t seld_event_list_len(const struct SeldEventList *list);

// # Safety
// `list` and `event` must be valid pointers.
enum SeldStatus seld_event_list_get(const struct SeldEventList *list,
                                    size_t index,
                                    struct SeldEvent *event);

// # Safety
// `list` must come from `seld_decode` and not be used afterwards.
void seld_event_list_free(struct SeldEventList *list);

// Aggregate SELD error from the four macro scores.
//
// # Safety
// `out` must be a valid pointer.
enum SeldStatus seld_aggregate_e_seld(double er, double f1, double le_deg, double lr, double *out);

// Angle in degrees between two unit vectors of three doubles each.
//
// # Safety
// `u` and `v` must each point to three doubles; `out` must be valid.
enum SeldStatus seld_angular_distance(const double *u, const double *v, double *out);

// Compares feature and inference time against the block budget.
//
// # Safety
// `out` must be a valid pointer.
enum SeldStatus seld_check_budget(double feature_s,
                                  double inference_s,
                                  double budget_s,
                                  struct SeldLatencyReport *out);

// Scores a prediction label CSV against a reference label CSV.
//
// # Safety
// Paths must be NUL-terminated UTF-8 strings; `out` must be valid.
enum SeldStatus seld_evaluate_csv(const char *reference_path,
                                  const char *prediction_path,
                                  double spatial_threshold_deg,
                                  struct SeldMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SELD_RT_H */
