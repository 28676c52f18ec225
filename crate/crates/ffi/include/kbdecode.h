#ifndef KBDECODE_H
#define KBDECODE_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Result code of every fallible call.
 */
typedef enum KbStatus {
  KB_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  KB_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  KB_STATUS_INVALID_UTF8 = 2,
  /**
   * A file could not be opened or read.
   */
  KB_STATUS_IO = 3,
  /**
   * A file or buffer was read but its contents are malformed.
   */
  KB_STATUS_PARSE = 4,
  /**
   * An argument was out of range or inconsistent with another.
   */
  KB_STATUS_INVALID_ARGUMENT = 5,
  /**
   * The decoder rejected its inputs.
   */
  KB_STATUS_DECODE = 6,
  /**
   * The library panicked; the handle arguments should be considered lost.
   */
  KB_STATUS_INTERNAL = 7,
} KbStatus;

/**
 * A loaded language model (character, word or multi-level).
 */
typedef struct KbLm KbLm;

/**
 * The output of one `kb_decode` call.
 */
typedef struct KbResult KbResult;

/**
 * A keyword tree bound to the vocabulary it was built with.
 */
typedef struct KbTrie KbTrie;

/**
 * A token inventory with its blank and word-boundary tokens.
 */
typedef struct KbVocab KbVocab;

/**
 * Decoder settings. Obtain defaults from `kb_decoder_config_default`.
 */
typedef struct KbDecoderConfig {
  size_t beam_width;
  double keyword_weight;
  double lm_weight;
  /**
   * Tokens this many nats below the frame maximum are skipped.
   * A negative value disables pruning.
   */
  double prune_logp_threshold;
  double length_bonus;
  size_t nbest;
  /**
   * Accept zero-frame input and return an empty transcript.
   */
  bool allow_empty;
} KbDecoderConfig;

/**
 * One entry of the n-best list. `transcript` is owned by the result.
 */
typedef struct KbHypothesis {
  const char *transcript;
  double score_total;
  double score_am;
  double score_lm;
  double score_boost;
  double score_length;
  size_t words;
} KbHypothesis;

/**
 * Keyword precision/recall plus error rates for one reference/hypothesis pair.
 */
typedef struct KbKeywordMetrics {
  size_t tp;
  size_t fp;
  size_t fn_;
  double precision;
  double recall;
  double f1;
  double wer;
  double cer;
} KbKeywordMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or "" after a
 * successful call. Valid until the next library call on the same thread.
 */
const char *kb_last_error(void);

/**
 * Library version as a static string.
 */
const char *kb_version(void);

/**
 * Loads a vocabulary file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum KbStatus kb_vocab_load(const char *path, struct KbVocab **out);

/**
 * Builds a vocabulary from `len` token strings. `boundary` < 0 means the
 * vocabulary has no word-boundary token.
 *
 * # Safety
 * `tokens` must point to `len` NUL-terminated strings and `out` must be writable.
 */
enum KbStatus kb_vocab_new(const char *const *tokens,
                           size_t len,
                           uint32_t blank,
                           int64_t boundary,
                           struct KbVocab **out);

/**
 * Number of tokens, or 0 for NULL.
 *
 * # Safety
 * `vocab` must be NULL or a live handle.
 */
size_t kb_vocab_len(const struct KbVocab *vocab);

/**
 * # Safety
 * `vocab` must be NULL or a handle not yet freed.
 */
void kb_vocab_free(struct KbVocab *vocab);

/**
 * Builds a keyword tree from `len` keywords. Single-character entries are
 * dropped and duplicates keep their first position.
 *
 * # Safety
 * `vocab` must be a live handle, `keywords` must point to `len`
 * NUL-terminated strings and `out` must be writable.
 */
enum KbStatus kb_trie_build(const struct KbVocab *vocab,
                            const char *const *keywords,
                            size_t len,
                            struct KbTrie **out);

/**
 * Loads a keyword list file (one keyword per line) into a tree.
 *
 * # Safety
 * `vocab` must be a live handle, `path` a NUL-terminated string and `out` writable.
 */
enum KbStatus kb_trie_load(const struct KbVocab *vocab, const char *path, struct KbTrie **out);

/**
 * Number of distinct keywords, or 0 for NULL.
 *
 * # Safety
 * `trie` must be NULL or a live handle.
 */
size_t kb_trie_num_keywords(const struct KbTrie *trie);

/**
 * # Safety
 * `trie` must be NULL or a handle not yet freed.
 */
void kb_trie_free(struct KbTrie *trie);

/**
 * Loads a language model. Pass a character ARPA file, a word ARPA file, or
 * both for multi-level scoring; NULL leaves that level out.
 * `word_oov_penalty` (natural log, ≤ 0) only applies to multi-level models.
 *
 * # Safety
 * Non-NULL paths must be NUL-terminated strings and `out` must be writable.
 */
enum KbStatus kb_lm_load(const char *char_arpa,
                         const char *word_arpa,
                         double word_oov_penalty,
                         struct KbLm **out);

/**
 * # Safety
 * `lm` must be NULL or a handle not yet freed.
 */
void kb_lm_free(struct KbLm *lm);

/**
 * Default decoder settings: 100 beams, no boosting, no LM, prune at 20 nats.
 */
struct KbDecoderConfig kb_decoder_config_default(void);

/**
 * Decodes a row-major `frames x vocab_size` matrix of natural-log
 * probabilities. `trie` and `lm` may be NULL; `config` NULL means defaults.
 *
 * # Safety
 * `logp` must point to `frames * vocab_size` floats, handles must be live
 * and `out` must be writable.
 */
enum KbStatus kb_decode(const struct KbVocab *vocab,
                        const struct KbTrie *trie,
                        const struct KbLm *lm,
                        const float *logp,
                        size_t frames,
                        size_t vocab_size,
                        const struct KbDecoderConfig *config,
                        struct KbResult **out);

/**
 * Best transcript, or NULL for a NULL result.
 *
 * # Safety
 * `result` must be NULL or a live handle.
 */
const char *kb_result_transcript(const struct KbResult *result);

/**
 * Number of n-best entries, or 0 for NULL.
 *
 * # Safety
 * `result` must be NULL or a live handle.
 */
size_t kb_result_nbest_len(const struct KbResult *result);

/**
 * Copies n-best entry `index` (0 = best) into `out`.
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum KbStatus kb_result_hypothesis(const struct KbResult *result,
                                   size_t index,
                                   struct KbHypothesis *out);

/**
 * # Safety
 * `result` must be NULL or a handle not yet freed.
 */
void kb_result_free(struct KbResult *result);

/**
 * Scores one hypothesis against its reference: WER, CER and keyword
 * precision/recall over matching blocks for the `len` given keywords.
 *
 * # Safety
 * `reference` and `hypothesis` must be NUL-terminated, `keywords` must point
 * to `len` NUL-terminated strings and `out` must be writable.
 */
enum KbStatus kb_score(const char *reference,
                       const char *hypothesis,
                       const char *const *keywords,
                       size_t len,
                       struct KbKeywordMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KBDECODE_H */
