#ifndef DYNRANK_H
#define DYNRANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Incremented on any incompatible change to the functions or types below.
 */
#define DR_ABI_VERSION 1

typedef enum DrProbMode {
  DR_PROB_MODE_AUTO = 0,
  DR_PROB_MODE_EXPLICIT = 1,
  DR_PROB_MODE_PROPORTIONAL = 2,
  DR_PROB_MODE_UNIFORM = 3,
} DrProbMode;

typedef enum DrStatus {
  DR_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DR_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  DR_STATUS_UTF8 = 2,
  /**
   * Query index outside the corpus.
   */
  DR_STATUS_OUT_OF_RANGE = 3,
  DR_STATUS_INVALID_ARGUMENT = 4,
  DR_STATUS_PARSE = 5,
  DR_STATUS_IO = 6,
  DR_STATUS_MODEL = 7,
  /**
   * The ranking does not fit the query's candidate set.
   */
  DR_STATUS_INVALID_RANKING = 8,
  /**
   * Unexpected internal failure; the library state is unchanged.
   */
  DR_STATUS_PANIC = 9,
} DrStatus;

typedef struct DrCorpus DrCorpus;

typedef struct DrModel DrModel;

typedef struct DrRanking DrRanking;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

uint32_t dr_abi_version(void);

/**
 * Message of the last failure on this thread; empty if none. Owned by the library.
 */
const char *dr_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void dr_string_free(char *s);

/**
 * Loads a corpus file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DrStatus dr_corpus_load(const char *path,
                             enum DrProbMode prob_mode,
                             bool binarize,
                             struct DrCorpus **out);

/**
 * Parses corpus text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum DrStatus dr_corpus_parse(const char *text,
                              enum DrProbMode prob_mode,
                              bool binarize,
                              struct DrCorpus **out);

/**
 * # Safety
 * `corpus` must be null or a handle from this library, not yet freed.
 */
void dr_corpus_free(struct DrCorpus *corpus);

/**
 * Number of queries; 0 for a null handle.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t dr_corpus_len(const struct DrCorpus *corpus);

/**
 * Number of candidate documents of query `index`.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
enum DrStatus dr_corpus_n_docs(const struct DrCorpus *corpus, size_t index, size_t *out);

/**
 * Identifier of query `index`, to be released with [`dr_string_free`].
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
enum DrStatus dr_corpus_query_id(const struct DrCorpus *corpus, size_t index, char **out);

/**
 * Nested greedy ranking of query `index` with `length` rows and tails of at most `width`.
 *
 * # Safety
 * `corpus` must be a live handle, `gain` a NUL-terminated string, `out` writable.
 */
enum DrStatus dr_rank_greedy(const struct DrCorpus *corpus,
                             size_t index,
                             const char *gain_name,
                             size_t length,
                             size_t width,
                             struct DrRanking **out);

/**
 * Parses `head:tail,tail head ...` against the document labels of query `index`.
 *
 * # Safety
 * `corpus` must be a live handle, `text` a NUL-terminated string, `out` writable.
 */
enum DrStatus dr_ranking_parse(const struct DrCorpus *corpus,
                               size_t index,
                               const char *text,
                               struct DrRanking **out);

/**
 * # Safety
 * `ranking` must be null or a handle from this library, not yet freed.
 */
void dr_ranking_free(struct DrRanking *ranking);

/**
 * Expected dynamic utility of `ranking` for query `index` under `gain`.
 *
 * # Safety
 * Handles must be live, `gain` a NUL-terminated string, `out` writable.
 */
enum DrStatus dr_ranking_utility(const struct DrCorpus *corpus,
                                 size_t index,
                                 const struct DrRanking *ranking,
                                 const char *gain_name,
                                 double *out);

/**
 * Expected utility of the first `k` documents on each intent's user path.
 *
 * # Safety
 * Handles must be live, `gain` a NUL-terminated string, `out` writable.
 */
enum DrStatus dr_ranking_truncated(const struct DrCorpus *corpus,
                                   size_t index,
                                   const struct DrRanking *ranking,
                                   const char *gain_name,
                                   size_t k,
                                   double *out);

/**
 * Text form of `ranking` using the labels of query `index`; release with [`dr_string_free`].
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum DrStatus dr_ranking_to_string(const struct DrCorpus *corpus,
                                   size_t index,
                                   const struct DrRanking *ranking,
                                   char **out);

/**
 * Loads a model file. `template_path` may be null for the default feature template.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `template_path` null or one, `out` writable.
 */
enum DrStatus dr_model_load(const char *path, const char *template_path, struct DrModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void dr_model_free(struct DrModel *model);

/**
 * Ranking of query `index` predicted by `model`. The query needs document text.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum DrStatus dr_predict(const struct DrModel *model,
                         const struct DrCorpus *corpus,
                         size_t index,
                         size_t length,
                         size_t width,
                         struct DrRanking **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNRANK_H */
