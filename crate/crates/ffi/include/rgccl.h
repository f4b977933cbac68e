/* C interface for the rgccl graph representation learning library. */

#ifndef RGCCL_H
#define RGCCL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code returned by every fallible call. Anything other than `Ok`
 * leaves a description in `rgccl_last_error`.
 */
typedef enum RgcclStatus {
  RGCCL_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RGCCL_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  RGCCL_STATUS_UTF8 = 2,
  /**
   * A value was rejected (bad config entry, missing labels, ...).
   */
  RGCCL_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A file could not be read.
   */
  RGCCL_STATUS_IO = 4,
  /**
   * A file or config string could not be parsed.
   */
  RGCCL_STATUS_PARSE = 5,
  /**
   * An iterative numerical routine failed to converge.
   */
  RGCCL_STATUS_NUMERIC = 6,
  /**
   * The caller-provided buffer is shorter than required.
   */
  RGCCL_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * An internal invariant failed; the library state is still valid.
   */
  RGCCL_STATUS_PANIC = 8,
} RgcclStatus;

/**
 * A loaded or generated graph with node features and optional labels.
 */
typedef struct RgcclDataset RgcclDataset;

/**
 * Trained encoder weights plus the architecture they belong to.
 */
typedef struct RgcclModel RgcclModel;

/**
 * Linear-probe quality and embedding-density summary, test split only.
 */
typedef struct RgcclMetrics {
  double accuracy;
  double macro_f1;
  /**
   * Largest minus smallest per-class recall.
   */
  double recall_gap;
  double mcc;
  /**
   * Mean over classes of the average embedding distance to the class
   * centroid, and the sample standard deviation of those averages.
   */
  double density_ave;
  double density_std;
} RgcclMetrics;

/**
 * Closed-form two-class error rates of the variance-only quadratic rule.
 */
typedef struct RgcclQda {
  /**
   * Misclassification probability for the low-variance class.
   */
  double p1;
  /**
   * Misclassification probability for the high-variance class.
   */
  double p2;
  /**
   * Error ratio max(p1, p2) / min(p1, p2).
   */
  double kappa;
  /**
   * Decision threshold |x| = t separating the two classes.
   */
  double threshold;
} RgcclQda;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or null if the
 * most recent call succeeded. The pointer is valid until the next rgccl
 * call on the same thread.
 */
const char *rgccl_last_error(void);

/**
 * Samples a two-block stochastic block model dataset with Gaussian node
 * features. Config keys: n, p1, p2, q (required); mu1, mu2 (comma-separated
 * means), sigma, seed, enforce_ordering.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RgcclStatus rgccl_csbm_generate(const char *config, struct RgcclDataset **out);

/**
 * Loads a dataset from an edge list, a feature CSV, and an optional label
 * file (pass null to skip labels; evaluation then becomes unavailable).
 *
 * # Safety
 * Path arguments must be NUL-terminated strings; `out` must be valid.
 */
enum RgcclStatus rgccl_dataset_load(const char *edges,
                                    const char *features,
                                    const char *labels,
                                    struct RgcclDataset **out);

/**
 * Releases a dataset handle. Null is accepted and ignored.
 *
 * # Safety
 * `ds` must be null or a pointer returned by a dataset constructor, not
 * yet freed.
 */
void rgccl_dataset_free(struct RgcclDataset *ds);

/**
 * Number of nodes.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum RgcclStatus rgccl_dataset_nodes(const struct RgcclDataset *ds, size_t *out);

/**
 * Number of undirected edges (diagonal entries not counted).
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum RgcclStatus rgccl_dataset_edges(const struct RgcclDataset *ds, size_t *out);

/**
 * Feature dimension.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum RgcclStatus rgccl_dataset_feature_dim(const struct RgcclDataset *ds, size_t *out);

/**
 * Second largest eigenvalue of the self-loop-augmented random-walk
 * propagation operator; governs how fast repeated propagation mixes.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum RgcclStatus rgccl_dataset_lambda2(const struct RgcclDataset *ds, double *out);

/**
 * Trains an encoder on the dataset with the contrastive coarsening
 * objective. `config` may be null for defaults; keys match the CLI train
 * command (preset, epochs, lr, alpha, beta, rate, delta, neg_pairs,
 * optimizer, seed, arch, hidden, k, norm, activation, dim_out,
 * row_normalize).
 *
 * # Safety
 * `ds` must be a live dataset handle, `config` null or NUL-terminated,
 * and `out` a valid pointer.
 */
enum RgcclStatus rgccl_train(const struct RgcclDataset *ds,
                             const char *config,
                             struct RgcclModel **out);

/**
 * Releases a model handle. Null is accepted and ignored.
 *
 * # Safety
 * `model` must be null or a pointer returned by `rgccl_train`, not yet
 * freed.
 */
void rgccl_model_free(struct RgcclModel *model);

/**
 * Embedding dimension produced by the model.
 *
 * # Safety
 * `model` must be a live model handle and `out` a valid pointer.
 */
enum RgcclStatus rgccl_model_dim(const struct RgcclModel *model, size_t *out);

/**
 * Writes node embeddings row-major into `out` (nodes x dim doubles).
 * `len` is the capacity of `out` in doubles and must be at least
 * nodes * dim.
 *
 * # Safety
 * `model` and `ds` must be live handles; `out` must point to at least
 * `len` writable doubles.
 */
enum RgcclStatus rgccl_embed(const struct RgcclModel *model,
                             const struct RgcclDataset *ds,
                             double *out,
                             size_t len);

/**
 * Embeds the dataset, trains a softmax probe on a per-class split of the
 * labels, and reports test-split metrics plus the embedding density
 * spread. Requires a labeled dataset. `config` may be null; keys:
 * per_class_train (default 20), probe_steps, probe_lr, probe_l2, seed.
 *
 * # Safety
 * `model` and `ds` must be live handles, `config` null or NUL-terminated,
 * and `out` a valid pointer.
 */
enum RgcclStatus rgccl_evaluate(const struct RgcclModel *model,
                                const struct RgcclDataset *ds,
                                const char *config,
                                struct RgcclMetrics *out);

/**
 * Closed-form error rates of the optimal variance-only quadratic decision
 * rule for two zero-mean Gaussian classes. Variances must be positive and
 * distinct (use a Monte Carlo estimate for the equal-variance case).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RgcclStatus rgccl_qda_closed_form(double var1, double var2, struct RgcclQda *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RGCCL_H */
