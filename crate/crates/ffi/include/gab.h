#ifndef GAB_H
#define GAB_H

/* Generated by cbindgen from src/lib.rs. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GabStatus {
  GAB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  GAB_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  GAB_STATUS_INVALID_UTF8 = 2,
  /**
   * An argument value was rejected.
   */
  GAB_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A file could not be read or written.
   */
  GAB_STATUS_IO = 4,
  /**
   * Input data was malformed or inconsistent.
   */
  GAB_STATUS_DATA = 5,
  /**
   * Training or evaluation failed.
   */
  GAB_STATUS_COMPUTE = 6,
  /**
   * The library panicked; the message says where.
   */
  GAB_STATUS_PANIC = 7,
} GabStatus;

/**
 * Cleaned instances together with their taxonomy.
 */
typedef struct GabDataset GabDataset;

/**
 * Encoded feature rows with one label each.
 */
typedef struct GabMatrix GabMatrix;

/**
 * A trained classifier.
 */
typedef struct GabModel GabModel;

/**
 * Results of an experiment grid.
 */
typedef struct GabResults GabResults;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library from this thread.
 */
const char *gab_last_error(void);

/**
 * Library version as a static string.
 */
const char *gab_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void gab_string_free(char *s);

/**
 * Reads and cleans a canonical CSV. `taxonomy_path` may be null for the
 * built-in taxonomy.
 *
 * # Safety
 * String arguments must be null or nul-terminated; `out` must be writable.
 */
enum GabStatus gab_dataset_load_csv(const char *path,
                                    const char *taxonomy_path,
                                    struct GabDataset **out);

/**
 * Generates a synthetic dataset from a named preset (`small`, `oracle`,
 * `bijective` or `clone`).
 *
 * # Safety
 * `preset` must be nul-terminated; `out` must be writable.
 */
enum GabStatus gab_dataset_synthetic(const char *preset, uint64_t seed, struct GabDataset **out);

/**
 * Number of instances, or 0 for null.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t gab_dataset_len(const struct GabDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live dataset handle, not used afterwards.
 */
void gab_dataset_free(struct GabDataset *ds);

/**
 * Encodes a dataset. `subset` is comma-separated (`object,grasp_fine`),
 * `level` is `instance` or `sequence`, `target` is `action`, `force` or
 * `constraint`. Sequence level uses the 34-column variant and its default
 * filters.
 *
 * # Safety
 * `ds` must be a live handle, strings nul-terminated, `out` writable.
 */
enum GabStatus gab_encode(const struct GabDataset *ds,
                          const char *subset,
                          const char *level,
                          const char *target,
                          struct GabMatrix **out);

/**
 * Reads a matrix in the `rows cols` text format.
 *
 * # Safety
 * `path` must be nul-terminated; `out` must be writable.
 */
enum GabStatus gab_matrix_read(const char *path, struct GabMatrix **out);

/**
 * # Safety
 * `m` must be null or a live matrix handle.
 */
size_t gab_matrix_rows(const struct GabMatrix *m);

/**
 * # Safety
 * `m` must be null or a live matrix handle.
 */
size_t gab_matrix_cols(const struct GabMatrix *m);

/**
 * # Safety
 * `m` must be null or a live matrix handle, not used afterwards.
 */
void gab_matrix_free(struct GabMatrix *m);

/**
 * Trains `classifier` (`forest`, `mlp`, `svm-ovo`, `boost-ovo`,
 * `mlp-binary-ovo`) on the matrix. `config_json` may be null for defaults.
 *
 * # Safety
 * `m` must be a live handle, strings null or nul-terminated, `out` writable.
 */
enum GabStatus gab_train(const struct GabMatrix *m,
                         const char *classifier,
                         const char *config_json,
                         uint64_t seed,
                         struct GabModel **out);

/**
 * # Safety
 * `path` must be nul-terminated; `out` must be writable.
 */
enum GabStatus gab_model_load(const char *path, struct GabModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` nul-terminated.
 */
enum GabStatus gab_model_save(const struct GabModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t gab_model_n_classes(const struct GabModel *model);

/**
 * Label of class `index`, owned by the model; null when out of range.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
const char *gab_model_class(const struct GabModel *model, size_t index);

/**
 * Predicts every row of `m`. `classes` and `confidences` must each hold
 * `gab_matrix_rows(m)` elements; `confidences` may be null.
 *
 * # Safety
 * Handles must be live and the output buffers large enough.
 */
enum GabStatus gab_model_predict(const struct GabModel *model,
                                 const struct GabMatrix *m,
                                 size_t *classes,
                                 double *confidences);

/**
 * # Safety
 * `model` must be null or a live model handle, not used afterwards.
 */
void gab_model_free(struct GabModel *model);

/**
 * Runs a grid given as JSON. With `ds` null the grid's own dataset is
 * loaded. `seed` replaces the grid's split seed.
 *
 * # Safety
 * `grid_json` must be nul-terminated, `ds` null or live, `out` writable.
 */
enum GabStatus gab_bench_run(const char *grid_json,
                             const struct GabDataset *ds,
                             uint64_t seed,
                             struct GabResults **out);

/**
 * Renders results as `csv`, `markdown` or `json` into a new string.
 *
 * # Safety
 * `results` must be live, `format` nul-terminated, `out` writable.
 */
enum GabStatus gab_results_render(const struct GabResults *results, const char *format, char **out);

/**
 * # Safety
 * `results` must be null or a live handle, not used afterwards.
 */
void gab_results_free(struct GabResults *results);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAB_H */
