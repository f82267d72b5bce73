#ifndef LFRERANK_H
#define LFRERANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LfrStatus {
  LFR_STATUS_OK = 0,
  LFR_STATUS_NULL_POINTER = 1,
  LFR_STATUS_INVALID_UTF8 = 2,
  LFR_STATUS_INVALID_ARGUMENT = 3,
  LFR_STATUS_IO = 4,
  LFR_STATUS_PARSE = 5,
  LFR_STATUS_MODEL_MISMATCH = 6,
  LFR_STATUS_MISSING_REFERENCE = 7,
  LFR_STATUS_EXTERNAL = 8,
  LFR_STATUS_INTERNAL = 9,
  LFR_STATUS_PANIC = 10,
} LfrStatus;

/**
 * Opaque reranker model handle.
 */
typedef struct LfrModel LfrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *lfr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lfr_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out_model` writable.
 */
enum LfrStatus lfr_model_load(const char *path, struct LfrModel **out_model);

/**
 * # Safety
 * `model` must come from [`lfr_model_load`] and not be used afterwards.
 * Null is ignored.
 */
void lfr_model_free(struct LfrModel *model);

/**
 * Reranker score of one candidate.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum LfrStatus lfr_model_score(const struct LfrModel *model,
                               const char *lf,
                               const char *candidate,
                               double *out_score);

/**
 * Index of the highest reranker score (first on ties).
 *
 * # Safety
 * `candidates` must point to `n` NUL-terminated strings.
 */
enum LfrStatus lfr_model_select(const struct LfrModel *model,
                                const char *lf,
                                const char *const *candidates,
                                size_t n,
                                size_t *out_index);

/**
 * Index maximizing `lambda * R + (1 - lambda) * G`, with `G` the mean token
 * log-probabilities in `logprobs`.
 *
 * # Safety
 * `candidates` must point to `n` strings and `logprobs` to `n` doubles.
 */
enum LfrStatus lfr_model_select_combined(const struct LfrModel *model,
                                         const char *lf,
                                         const char *const *candidates,
                                         const double *logprobs,
                                         size_t n,
                                         double lambda,
                                         size_t *out_index);

/**
 * Pairwise margin loss of one set.
 *
 * # Safety
 * `gold` and `pred` must each point to `n` doubles.
 */
enum LfrStatus lfr_set_loss(const double *gold,
                            const double *pred,
                            size_t n,
                            double gamma,
                            double *out_loss);

/**
 * Sentence BLEU (up to 4-grams, no smoothing).
 *
 * # Safety
 * Both strings must be NUL-terminated.
 */
enum LfrStatus lfr_bleu(const char *candidate, const char *reference, double *out_score);

/**
 * Standardize `n` values into `out_values` (may alias `values`). Writes
 * zeros and sets `*out_degenerate` to 1 for constant or single inputs.
 *
 * # Safety
 * `values` and `out_values` must each hold `n` doubles.
 */
enum LfrStatus lfr_standardize(const double *values,
                               size_t n,
                               double *out_values,
                               int32_t *out_degenerate);

/**
 * Top-1 accuracy over `n_sets` sets stored back to back; `set_sizes[i]`
 * gives the length of set `i`.
 *
 * # Safety
 * Arrays must hold `sum(set_sizes)` elements.
 */
enum LfrStatus lfr_top1_accuracy(const double *scores,
                                 const uint8_t *labels,
                                 const size_t *set_sizes,
                                 size_t n_sets,
                                 double *out_value);

/**
 * Pooled ranking accuracy, laid out as for [`lfr_top1_accuracy`].
 * `per_set_mean` nonzero averages per set instead.
 *
 * # Safety
 * Arrays must hold `sum(set_sizes)` elements.
 */
enum LfrStatus lfr_ranking_accuracy(const double *scores,
                                    const uint8_t *labels,
                                    const size_t *set_sizes,
                                    size_t n_sets,
                                    int32_t per_set_mean,
                                    double *out_value);

/**
 * Rewrite Freebase identifiers with the built-in table. The result is
 * allocated here; free it with [`lfr_string_free`].
 *
 * # Safety
 * `lf` must be NUL-terminated and `out_text` writable.
 */
enum LfrStatus lfr_map_freebase_ids(const char *lf, char **out_text);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. Null is ignored.
 */
void lfr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LFRERANK_H */
