#ifndef ZSR_H
#define ZSR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ZsrModality {
  ZSR_MODALITY_RGB = 0,
  ZSR_MODALITY_DEPTH = 1,
  ZSR_MODALITY_BOTH = 2,
} ZsrModality;

typedef enum ZsrProtocol {
  ZSR_PROTOCOL_P1 = 0,
  ZSR_PROTOCOL_P2 = 1,
} ZsrProtocol;

/**
 * Result code of every fallible call.
 */
typedef enum ZsrStatus {
  ZSR_STATUS_OK = 0,
  ZSR_STATUS_NULL_POINTER = 1,
  ZSR_STATUS_INVALID_ARGUMENT = 2,
  ZSR_STATUS_IO = 3,
  ZSR_STATUS_FORMAT = 4,
  ZSR_STATUS_CONFIG = 5,
  ZSR_STATUS_PROTOCOL = 6,
  ZSR_STATUS_DEGENERATE = 7,
  ZSR_STATUS_BUFFER_TOO_SMALL = 8,
  ZSR_STATUS_PANIC = 9,
} ZsrStatus;

/**
 * Validated manifest.
 */
typedef struct ZsrDataset ZsrDataset;

/**
 * Trainable two-stream model.
 */
typedef struct ZsrModel ZsrModel;

/**
 * Class-embedding table.
 */
typedef struct ZsrTable ZsrTable;

/**
 * Model hyperparameters. Start from [`zsr_model_config_default`].
 */
typedef struct ZsrModelConfig {
  size_t embed_dim;
  size_t num_heads;
  size_t num_layers;
  size_t mlp_ratio;
  size_t segment_size;
  size_t hidden;
  size_t fc_count;
  size_t max_frames;
  enum ZsrModality modality;
  /**
   * Softmax temperature; zero or less selects the cosine-regression loss.
   */
  double tau;
} ZsrModelConfig;

/**
 * Synthetic dataset parameters. Start from [`zsr_synthetic_spec_default`].
 */
typedef struct ZsrSyntheticSpec {
  size_t classes;
  size_t attribute_dim;
  size_t samples_per_class;
  size_t min_frames;
  size_t max_frames;
  double noise;
  uint64_t seed;
  size_t frame_size;
} ZsrSyntheticSpec;

/**
 * Summary of a protocol run.
 */
typedef struct ZsrProtocolSummary {
  size_t runs;
  double mean_accuracy;
  double std_accuracy;
  /**
   * Negative when no training epochs were recorded.
   */
  double mean_seen_accuracy;
} ZsrProtocolSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call on this thread.
 */
const char *zsr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *zsr_version(void);

struct ZsrModelConfig zsr_model_config_default(void);

struct ZsrSyntheticSpec zsr_synthetic_spec_default(void);

/**
 * Cosine similarity of two `len`-long vectors.
 *
 * # Safety
 * `a` and `b` must point to `len` readable doubles; `out` must be writable.
 */
enum ZsrStatus zsr_similarity(const double *a, const double *b, size_t len, double *out);

/**
 * Splits `k` classes into seen and unseen ids. `seen` and `unseen` must each
 * hold `k` entries; the counts actually written go to `seen_len` and
 * `unseen_len`.
 *
 * # Safety
 * Output buffers must be writable for `k` elements; length pointers writable.
 */
enum ZsrStatus zsr_split_classes(size_t k,
                                 enum ZsrProtocol protocol,
                                 uint64_t seed,
                                 size_t *seen,
                                 size_t *seen_len,
                                 size_t *unseen,
                                 size_t *unseen_len);

/**
 * Writes a synthetic dataset (clips, `manifest.jsonl`, `embeddings.tsv`)
 * into `out_dir`.
 *
 * # Safety
 * `spec` must be readable and `out_dir` a NUL-terminated string.
 */
enum ZsrStatus zsr_generate_synthetic(const struct ZsrSyntheticSpec *spec, const char *out_dir);

/**
 * Reads a class-embedding table (`name<TAB>values`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum ZsrStatus zsr_table_load(const char *path, struct ZsrTable **out);

/**
 * # Safety
 * `table` must come from [`zsr_table_load`] and not be used afterwards.
 */
void zsr_table_free(struct ZsrTable *table);

/**
 * Number of classes, or 0 for a null table.
 *
 * # Safety
 * `table` must be null or a live table.
 */
size_t zsr_table_len(const struct ZsrTable *table);

/**
 * Embedding dimension, or 0 for a null table.
 *
 * # Safety
 * `table` must be null or a live table.
 */
size_t zsr_table_dim(const struct ZsrTable *table);

/**
 * Index of the class nearest to `z` by cosine similarity.
 *
 * # Safety
 * `table` must be live, `z` readable for `len` doubles, `out` writable.
 */
enum ZsrStatus zsr_classify(const struct ZsrTable *table, const double *z, size_t len, size_t *out);

/**
 * Loads and validates a manifest, checking the files `modality` needs.
 *
 * # Safety
 * `manifest` must be a NUL-terminated string and `out` writable.
 */
enum ZsrStatus zsr_dataset_load(const char *manifest,
                                enum ZsrModality modality,
                                struct ZsrDataset **out);

/**
 * # Safety
 * `dataset` must come from [`zsr_dataset_load`] and not be used afterwards.
 */
void zsr_dataset_free(struct ZsrDataset *dataset);

/**
 * Number of samples, or 0 for a null dataset.
 *
 * # Safety
 * `dataset` must be null or live.
 */
size_t zsr_dataset_len(const struct ZsrDataset *dataset);

/**
 * Class id of sample `index`.
 *
 * # Safety
 * `dataset` must be live and `out` writable.
 */
enum ZsrStatus zsr_dataset_class(const struct ZsrDataset *dataset, size_t index, size_t *out);

/**
 * Creates a freshly initialized model.
 *
 * # Safety
 * `config` must be readable and `out` writable.
 */
enum ZsrStatus zsr_model_new(const struct ZsrModelConfig *config,
                             uint64_t seed,
                             struct ZsrModel **out);

/**
 * # Safety
 * `model` must come from [`zsr_model_new`] and not be used afterwards.
 */
void zsr_model_free(struct ZsrModel *model);

/**
 * Number of trainable scalars, or 0 for a null model.
 *
 * # Safety
 * `model` must be null or live.
 */
size_t zsr_model_param_count(const struct ZsrModel *model);

/**
 * # Safety
 * `model` must be live and `path` a NUL-terminated string.
 */
enum ZsrStatus zsr_model_save(const struct ZsrModel *model, const char *path);

/**
 * Replaces the model's parameters with those stored in a checkpoint of the
 * same architecture.
 *
 * # Safety
 * `model` must be live and `path` a NUL-terminated string.
 */
enum ZsrStatus zsr_model_load(struct ZsrModel *model, const char *path);

/**
 * Embeds sample `index` of `dataset`. `out` must hold `cap` doubles; the
 * embedding length is written to `out_len` even when `cap` is too small.
 *
 * # Safety
 * Handles must be live; `out` writable for `cap` doubles; `out_len` writable.
 */
enum ZsrStatus zsr_model_embed(const struct ZsrModel *model,
                               const struct ZsrDataset *dataset,
                               size_t index,
                               double *out,
                               size_t cap,
                               size_t *out_len);

/**
 * Runs the full split/train/evaluate protocol and writes `metrics.json` and
 * `confusion.csv` into `out_dir`.
 *
 * # Safety
 * Strings must be NUL-terminated, `config` readable, `summary` writable or null.
 */
enum ZsrStatus zsr_run_protocol(const char *manifest,
                                const char *embeddings,
                                enum ZsrProtocol protocol,
                                uint64_t seed,
                                size_t runs,
                                size_t epochs,
                                double lr,
                                size_t batch,
                                const struct ZsrModelConfig *config,
                                const char *out_dir,
                                struct ZsrProtocolSummary *summary);

/**
 * Runs the gradient-check suite for each seed; the number of failing checks
 * goes to `failed` and the total to `total`.
 *
 * # Safety
 * `seeds` readable for `n` values; `failed` and `total` writable.
 */
enum ZsrStatus zsr_grad_check(const uint64_t *seeds, size_t n, size_t *failed, size_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZSR_H */
