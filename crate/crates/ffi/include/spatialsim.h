#ifndef SPATIALSIM_H
#define SPATIALSIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_IO = 3,
  SS_STATUS_PARSE = 4,
  SS_STATUS_TASK_MISMATCH = 5,
  SS_STATUS_INDEX_OUT_OF_RANGE = 6,
  SS_STATUS_BUFFER_TOO_SMALL = 7,
  SS_STATUS_INTERNAL = 8,
  SS_STATUS_PANIC = 9,
} SsStatus;

typedef enum SsSplit {
  SS_SPLIT_TRAIN = 0,
  SS_SPLIT_VALID = 1,
  SS_SPLIT_TEST = 2,
} SsSplit;

typedef enum SsTask {
  SS_TASK_IDENTIFICATION = 0,
  SS_TASK_COMPARISON = 1,
} SsTask;

typedef enum SsLayer {
  SS_LAYER_MPGNN = 0,
  SS_LAYER_RDS = 1,
  SS_LAYER_DEEPSET = 2,
  SS_LAYER_MLP = 3,
} SsLayer;

/**
 * Opaque dataset handle.
 */
typedef struct SsDataset SsDataset;

/**
 * Opaque model handle.
 */
typedef struct SsModel SsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ss_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ss_last_error_message(void);

/**
 * Generate one split of the Identification dataset for `n_obj` objects.
 * `count` is the size of the requested split.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum SsStatus ss_dataset_gen_identification(uintptr_t n_obj,
                                            uintptr_t count,
                                            uint64_t seed,
                                            enum SsSplit split,
                                            struct SsDataset **out);

/**
 * Generate one Comparison split with rotations up to `theta_max`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum SsStatus ss_dataset_gen_comparison(uintptr_t n_min,
                                        uintptr_t n_max,
                                        double theta_max,
                                        uintptr_t count,
                                        uint64_t seed,
                                        enum SsSplit split,
                                        struct SsDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SsStatus ss_dataset_read(const char *path, struct SsDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle and `path` a NUL-terminated string.
 */
enum SsStatus ss_dataset_write(const struct SsDataset *dataset, const char *path);

/**
 * Number of samples, or 0 for a NULL handle.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
uintptr_t ss_dataset_len(const struct SsDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle and `out` writable.
 */
enum SsStatus ss_dataset_task(const struct SsDataset *dataset, enum SsTask *out);

/**
 * # Safety
 * `dataset` must be a live handle and `out` writable.
 */
enum SsStatus ss_dataset_label(const struct SsDataset *dataset, uintptr_t index, uint8_t *out);

/**
 * # Safety
 * `dataset` must be NULL or a handle not yet freed.
 */
void ss_dataset_free(struct SsDataset *dataset);

/**
 * Fresh model sized for `shape_of` (its task and, for the MLP baseline,
 * its object counts).
 *
 * # Safety
 * `shape_of` must be a live handle and `out` writable.
 */
enum SsStatus ss_model_new(enum SsLayer layer,
                           const struct SsDataset *shape_of,
                           uint64_t seed,
                           struct SsModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SsStatus ss_model_load(const char *path, struct SsModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
enum SsStatus ss_model_save(const struct SsModel *model, const char *path);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void ss_model_free(struct SsModel *model);

/**
 * Number of trainable scalars, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
uintptr_t ss_model_num_params(const struct SsModel *model);

/**
 * Train in place on `train`, keeping the epoch with the best accuracy on
 * `valid`, which is written to `out_valid_accuracy` when non-NULL.
 *
 * # Safety
 * All handles must be live; `out_valid_accuracy` NULL or writable.
 */
enum SsStatus ss_model_train(struct SsModel *model,
                             const struct SsDataset *train_set,
                             const struct SsDataset *valid_set,
                             uintptr_t epochs,
                             double lr,
                             uintptr_t batch_size,
                             uint64_t seed,
                             double *out_valid_accuracy);

/**
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum SsStatus ss_model_evaluate(const struct SsModel *model,
                                const struct SsDataset *dataset,
                                double *out);

/**
 * Logits `[C+, C-]` for every sample, written row-major into `out`
 * (capacity `out_len`, at least `2 * len`).
 *
 * # Safety
 * Both handles must be live; `out` must hold `out_len` doubles.
 */
enum SsStatus ss_model_predict(const struct SsModel *model,
                               const struct SsDataset *dataset,
                               double *out,
                               uintptr_t out_len);

/**
 * Logits for raw configurations given as `n × 10` row-major features.
 * Identification models read only the first configuration; pass NULL and
 * 0 for the second.
 *
 * # Safety
 * `features1` must hold `n1 * 10` doubles, `features2` `n2 * 10` when
 * used, and `out` two doubles.
 */
enum SsStatus ss_model_score(const struct SsModel *model,
                             const double *features1,
                             uintptr_t n1,
                             const double *features2,
                             uintptr_t n2,
                             double *out);

/**
 * Decision heatmap `C+ − C-` over a `res × res` grid (row = y, column = x),
 * written row-major into `out`. The covered rectangle is written to
 * `out_extent` as `[x_min, x_max, y_min, y_max]` when non-NULL.
 *
 * # Safety
 * Both handles must be live; `out` must hold `out_len` doubles and
 * `out_extent` NULL or four doubles.
 */
enum SsStatus ss_model_heatmap(const struct SsModel *model,
                               const struct SsDataset *dataset,
                               uintptr_t sample,
                               uintptr_t object,
                               uintptr_t res,
                               double *out,
                               uintptr_t out_len,
                               double *out_extent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPATIALSIM_H */
