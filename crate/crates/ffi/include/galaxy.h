#ifndef GALAXY_H
#define GALAXY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every `gx_*` call.
 */
typedef enum GxStatus {
  GX_STATUS_OK = 0,
  /**
   * The session collected its batch; no query is outstanding.
   */
  GX_STATUS_BATCH_COMPLETE = 1,
  GX_STATUS_NULL_POINTER = -1,
  GX_STATUS_INPUT = -2,
  GX_STATUS_FORMAT = -3,
  GX_STATUS_POOL_EXHAUSTED = -4,
  GX_STATUS_ORDER_EXHAUSTED = -5,
  GX_STATUS_PROTOCOL = -6,
  GX_STATUS_IO = -7,
  GX_STATUS_PANIC = -99,
} GxStatus;

typedef enum GxProvenance {
  GX_PROVENANCE_BISECTION = 0,
  GX_PROVENANCE_FALLBACK_RANDOM = 1,
  GX_PROVENANCE_FALLBACK_CONFIDENCE = 2,
  GX_PROVENANCE_SEED_ROUND = 3,
  GX_PROVENANCE_BASELINE = 4,
} GxProvenance;

/**
 * One-shot baselines available through `gx_select_baseline`.
 */
typedef enum GxStrategy {
  GX_STRATEGY_CONFIDENCE = 0,
  /**
   * Most likely positive over classes `0..K-1`.
   */
  GX_STRATEGY_MLP = 1,
  GX_STRATEGY_RANDOM = 2,
} GxStrategy;

/**
 * Row-major N x K probability matrix.
 */
typedef struct GxScores GxScores;

/**
 * A GALAXY batch in progress.
 */
typedef struct GxSession GxSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. Valid until
 * the next `gx_*` call on the same thread.
 */
const char *gx_last_error_message(void);

/**
 * Copies `n * k` row-major probabilities. Rows are renormalized.
 */
enum GxStatus gx_scores_new(const float *data, size_t n, size_t k, struct GxScores **out);

enum GxStatus gx_scores_read_gxsm(const char *file, struct GxScores **out);

enum GxStatus gx_scores_write_gxsm(const struct GxScores *scores, const char *file);

enum GxStatus gx_scores_shape(const struct GxScores *scores, size_t *n, size_t *k);

/**
 * Reads probability `(row, class)` after renormalization.
 */
enum GxStatus gx_scores_get(const struct GxScores *scores, size_t row, size_t class_, float *out);

void gx_scores_free(struct GxScores *scores);

/**
 * Starts a batch of `batch_size` queries. `ids[i]` is labeled `classes[i]`;
 * class `K-1` is out-of-distribution. The scores handle may be freed afterwards.
 */
enum GxStatus gx_session_new(const struct GxScores *scores,
                             const size_t *ids,
                             const size_t *classes,
                             size_t n_labeled,
                             size_t batch_size,
                             uint64_t seed,
                             struct GxSession **out);

/**
 * Writes the outstanding query. Returns `GX_STATUS_BATCH_COMPLETE` when the
 * batch has all its labels or the pool is empty. Repeated calls return the
 * same query until it is answered.
 */
enum GxStatus gx_session_next(struct GxSession *session, size_t *id, enum GxProvenance *provenance);

/**
 * Answers the outstanding query.
 */
enum GxStatus gx_session_submit(struct GxSession *session, size_t id, size_t class_);

/**
 * Current graph order.
 */
enum GxStatus gx_session_ord(const struct GxSession *session, size_t *out);

/**
 * Number of labels held, seeds included.
 */
enum GxStatus gx_session_labeled_count(const struct GxSession *session, size_t *out);

void gx_session_free(struct GxSession *session);

/**
 * Fills `out_ids` with up to `batch_size` unlabeled ids chosen by a one-shot
 * baseline and writes how many were chosen to `out_len`. `out_ids` must hold
 * `batch_size` entries.
 */
enum GxStatus gx_select_baseline(const struct GxScores *scores,
                                 enum GxStrategy strategy,
                                 const size_t *ids,
                                 const size_t *classes,
                                 size_t n_labeled,
                                 size_t batch_size,
                                 uint64_t seed,
                                 size_t *out_ids,
                                 size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GALAXY_H */
