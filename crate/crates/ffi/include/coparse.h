#ifndef COPARSE_H
#define COPARSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum CoparseStatus {
  COPARSE_STATUS_OK = 0,
  // A required pointer argument was null.
  COPARSE_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  COPARSE_STATUS_INVALID_UTF8 = 2,
  // Invalid configuration, scene description or label vocabulary.
  COPARSE_STATUS_CONFIG = 3,
  // Unreadable or malformed input data.
  COPARSE_STATUS_DATA = 4,
  // A solver could not produce a result.
  COPARSE_STATUS_SOLVER = 5,
  // An index argument was out of range.
  COPARSE_STATUS_OUT_OF_RANGE = 6,
  // The library panicked; the handle arguments should be considered lost.
  COPARSE_STATUS_PANIC = 7,
} CoparseStatus;

// Pipeline parameters.
typedef struct CoparseConfig CoparseConfig;

// A loaded or generated image collection with ground truth.
typedef struct CoparseCorpus CoparseCorpus;

// Cross-validated predictions and metrics for one corpus.
typedef struct CoparseRun CoparseRun;

// Headline metrics of a run: fold means and sample standard deviations.
typedef struct CoparseMetrics {
  double apa_mean;
  double apa_std;
  double magr_mean;
  double magr_std;
} CoparseMetrics;

// A borrowed view of one label map, row-major, `width * height` entries.
typedef struct CoparseLabelMap {
  size_t width;
  size_t height;
  const uint16_t *labels;
} CoparseLabelMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the thread.
const char *coparse_last_error(void);

// Library version as a static nul-terminated string.
const char *coparse_version(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void coparse_string_free(char *s);

// Default configuration.
//
// # Safety
// `out` must be a valid pointer to write the handle to.
enum CoparseStatus coparse_config_default(struct CoparseConfig **out);

// Parses a JSON configuration; absent fields take their defaults and
// unknown fields are rejected.
//
// # Safety
// `json` must be a nul-terminated string; `out` a valid pointer.
enum CoparseStatus coparse_config_from_json(const char *json, struct CoparseConfig **out);

// # Safety
// `config` must be a live handle.
enum CoparseStatus coparse_config_set_seed(struct CoparseConfig *config, uint64_t seed);

// # Safety
// `config` must be a live handle.
enum CoparseStatus coparse_config_set_fold_count(struct CoparseConfig *config, size_t folds);

// The configuration as a JSON string, to be freed with
// [`coparse_string_free`].
//
// # Safety
// `config` must be a live handle; `out` a valid pointer.
enum CoparseStatus coparse_config_to_json(const struct CoparseConfig *config, char **out);

// # Safety
// `config` must be null or a live handle, not used afterwards.
void coparse_config_free(struct CoparseConfig *config);

// Loads a corpus from a manifest file.
//
// # Safety
// `manifest_path` must be a nul-terminated string; `out` a valid pointer.
enum CoparseStatus coparse_corpus_load(const char *manifest_path, struct CoparseCorpus **out);

// Generates a synthetic corpus of `images` images. `scene_json` may be null
// for the default scene; its seed is replaced by `seed`.
//
// # Safety
// `scene_json` must be null or a nul-terminated string; `out` a valid pointer.
enum CoparseStatus coparse_corpus_generate(const char *scene_json,
                                           size_t images,
                                           uint64_t seed,
                                           struct CoparseCorpus **out);

// Writes the corpus rasters and `manifest.json` into `dir`.
//
// # Safety
// `corpus` must be a live handle; `dir` a nul-terminated string.
enum CoparseStatus coparse_corpus_write(const struct CoparseCorpus *corpus, const char *dir);

// Number of images, or 0 for a null handle.
//
// # Safety
// `corpus` must be null or a live handle.
size_t coparse_corpus_image_count(const struct CoparseCorpus *corpus);

// # Safety
// `corpus` must be null or a live handle, not used afterwards.
void coparse_corpus_free(struct CoparseCorpus *corpus);

// Cross-validated run: every image is labeled by a model fitted on the
// other folds. Uses the default configuration when `config` is null.
//
// # Safety
// `corpus` must be a live handle, `config` null or a live handle, `out` a
// valid pointer.
enum CoparseStatus coparse_run(const struct CoparseCorpus *corpus,
                               const struct CoparseConfig *config,
                               struct CoparseRun **out);

// # Safety
// `run` must be a live handle; `out` a valid pointer.
enum CoparseStatus coparse_run_metrics(const struct CoparseRun *run, struct CoparseMetrics *out);

// The full cross-validation report as JSON, to be freed with
// [`coparse_string_free`].
//
// # Safety
// `run` must be a live handle; `out` a valid pointer.
enum CoparseStatus coparse_run_report_json(const struct CoparseRun *run, char **out);

// Predicted label map of image `index` (corpus order). The view borrows
// from `run` and is valid until the run is freed.
//
// # Safety
// `run` must be a live handle; `out` a valid pointer.
enum CoparseStatus coparse_run_label_map(const struct CoparseRun *run,
                                         size_t index,
                                         struct CoparseLabelMap *out);

// # Safety
// `run` must be null or a live handle, not used afterwards.
void coparse_run_free(struct CoparseRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COPARSE_H */
