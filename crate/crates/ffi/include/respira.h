#ifndef RESPIRA_H
#define RESPIRA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum RespiraStatus {
  RESPIRA_STATUS_OK = 0,
  RESPIRA_STATUS_NULL_POINTER = 1,
  RESPIRA_STATUS_INVALID_ARGUMENT = 2,
  RESPIRA_STATUS_IO = 3,
  RESPIRA_STATUS_FORMAT = 4,
  RESPIRA_STATUS_MODEL = 5,
  RESPIRA_STATUS_SIGNAL = 6,
  RESPIRA_STATUS_PANIC = 7,
} RespiraStatus;

// A loaded model bundle. Create with [`respira_model_load`] or
// [`respira_model_from_json`]; release with [`respira_model_free`].
typedef struct RespiraModel RespiraModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *respira_version(void);

// Message of the last failed call on this thread, or null if none failed.
// The pointer stays valid until the next failing call on the same thread.
const char *respira_last_error(void);

// Name of breathing class `label` ("normal", "panting", "deep"), or null.
const char *respira_class_name(size_t label);

// Dominant breathing rate of `signal` in breaths per minute, searched in
// `[band_lo_hz, band_hi_hz]`. Pass zeros for both to use the default band.
//
// # Safety
// `signal` must point to `len` readable values and `out_bpm` must be writable.
enum RespiraStatus respira_estimate_br(const double *signal,
                                       size_t len,
                                       double fs_hz,
                                       double band_lo_hz,
                                       double band_hi_hz,
                                       double *out_bpm);

// Number of values [`respira_window_features`] writes.
size_t respira_feature_count(bool include_br);

// Feature vector of one window. `channels` holds five pointers, each to
// `len` samples, in the order pressure, flow, tidal volume, chest and
// abdomen circumference. With `include_br` the breathing rate of the tidal
// volume channel (default band) is appended. `out` must have room for
// `out_len >= respira_feature_count(include_br)` values.
//
// # Safety
// `channels` must point to five readable pointers of `len` values each and
// `out` to `out_len` writable values.
enum RespiraStatus respira_window_features(const double *const *channels,
                                           size_t len,
                                           double fs_hz,
                                           bool include_br,
                                           double *out,
                                           size_t out_len);

// Loads a model bundle saved by the command-line tool.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum RespiraStatus respira_model_load(const char *path, struct RespiraModel **out);

// Parses a model bundle from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum RespiraStatus respira_model_from_json(const char *json, struct RespiraModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void respira_model_free(struct RespiraModel *model);

// Input width the model expects, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t respira_model_n_features(const struct RespiraModel *model);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t respira_model_n_classes(const struct RespiraModel *model);

// Predicts one unscaled feature vector. The bundled scaler is applied
// internally. `scores` may be null; otherwise it receives
// `min(scores_len, n_classes)` class scores.
//
// # Safety
// `model` must be a live handle, `x` must point to `len` values, `out_label`
// must be writable and `scores` null or writable for `scores_len` values.
enum RespiraStatus respira_model_predict(const struct RespiraModel *model,
                                         const double *x,
                                         size_t len,
                                         size_t *out_label,
                                         double *scores,
                                         size_t scores_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESPIRA_H */
