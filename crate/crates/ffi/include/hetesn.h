#ifndef HETESN_H
#define HETESN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum HetesnStatus {
  HETESN_STATUS_OK = 0,
  // A required pointer argument was null.
  HETESN_STATUS_NULL_POINTER = 1,
  // Bad configuration, dimensions or argument values.
  HETESN_STATUS_INVALID_ARGUMENT = 2,
  // A file could not be read or written.
  HETESN_STATUS_IO = 3,
  // A file was read but its contents are malformed.
  HETESN_STATUS_FORMAT = 4,
  // Non-finite values or a failed numerical routine.
  HETESN_STATUS_NUMERICAL = 5,
  // The caller's output buffer is too small.
  HETESN_STATUS_BUFFER_TOO_SMALL = 6,
  // An internal error; the call had no effect.
  HETESN_STATUS_INTERNAL = 7,
} HetesnStatus;

// A frame-by-feature matrix produced by feature extraction.
typedef struct HetesnFeatures HetesnFeatures;

// A trained model: reservoir, readout and feature settings.
typedef struct HetesnModel HetesnModel;

// A reservoir without readout.
typedef struct HetesnReservoir HetesnReservoir;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The message of the last failed call on this thread, or an empty string.
// Valid until the next call into this library on the same thread.
const char *hetesn_last_error(void);

// Library version as a static NUL-terminated string.
const char *hetesn_version(void);

// Loads a trained model saved by `hetesn train`.
//
// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum HetesnStatus hetesn_model_load(const char *path, struct HetesnModel **out);

// # Safety
// `model` is null or a handle from [`hetesn_model_load`] not yet freed.
void hetesn_model_free(struct HetesnModel *model);

// Features per frame the model expects (before context stacking), or 0
// for a null handle.
//
// # Safety
// `model` is null or a live handle.
size_t hetesn_model_n_features(const struct HetesnModel *model);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `model` is null or a live handle.
size_t hetesn_model_n_classes(const struct HetesnModel *model);

// Classifies every frame of one utterance. `features` is row-major
// `n_frames x n_features`; `labels` receives `n_frames` class indices.
//
// # Safety
// `model` is a live handle; `features` holds `n_frames * n_features`
// doubles; `labels` has room for `n_frames` values.
enum HetesnStatus hetesn_model_classify(const struct HetesnModel *model,
                                        const double *features,
                                        size_t n_frames,
                                        size_t n_features,
                                        uint32_t *labels);

// Copies the model's reservoir into a new handle.
//
// # Safety
// `model` is a live handle; `out` is writable.
enum HetesnStatus hetesn_model_reservoir(const struct HetesnModel *model,
                                         struct HetesnReservoir **out);

// Loads the reservoir from a model container, ignoring any readout.
//
// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum HetesnStatus hetesn_reservoir_load(const char *path, struct HetesnReservoir **out);

// # Safety
// `reservoir` is null or a live handle.
void hetesn_reservoir_free(struct HetesnReservoir *reservoir);

// Input dimension, or 0 for a null handle.
//
// # Safety
// `reservoir` is null or a live handle.
size_t hetesn_reservoir_n_in(const struct HetesnReservoir *reservoir);

// Length of the concatenated state vector, or 0 for a null handle.
//
// # Safety
// `reservoir` is null or a live handle.
size_t hetesn_reservoir_state_dim(const struct HetesnReservoir *reservoir);

// Runs the reservoir from the zero state over `n_steps` inputs (row-major
// `n_steps x n_in`) and writes the `n_steps x state_dim` states row-major
// into `states`, whose capacity in doubles is `states_len`.
//
// # Safety
// `reservoir` is a live handle; `inputs` holds `n_steps * n_in` doubles;
// `states` has room for `states_len` doubles.
enum HetesnStatus hetesn_reservoir_run(const struct HetesnReservoir *reservoir,
                                       const double *inputs,
                                       size_t n_steps,
                                       size_t n_in,
                                       double *states,
                                       size_t states_len);

// Computes log Bark-band energy features of a mono 16-bit WAV file. With a
// non-null `model` its recorded front-end settings are used, otherwise the
// defaults.
//
// # Safety
// `wav_path` is a NUL-terminated string; `model` is null or a live handle;
// `out` is writable.
enum HetesnStatus hetesn_features_extract(const char *wav_path,
                                          const struct HetesnModel *model,
                                          struct HetesnFeatures **out);

// # Safety
// `features` is null or a live handle.
void hetesn_features_free(struct HetesnFeatures *features);

// Number of frames, or 0 for a null handle.
//
// # Safety
// `features` is null or a live handle.
size_t hetesn_features_n_frames(const struct HetesnFeatures *features);

// Features per frame, or 0 for a null handle.
//
// # Safety
// `features` is null or a live handle.
size_t hetesn_features_n_features(const struct HetesnFeatures *features);

// Row-major feature values, valid until the handle is freed; null for a
// null handle.
//
// # Safety
// `features` is null or a live handle.
const double *hetesn_features_data(const struct HetesnFeatures *features);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HETESN_H */
