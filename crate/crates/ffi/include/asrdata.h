#ifndef ASRDATA_H
#define ASRDATA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum AsrStatus {
  ASR_STATUS_OK = 0,
  ASR_STATUS_NULL_POINTER = 1,
  ASR_STATUS_INVALID_UTF8 = 2,
  ASR_STATUS_INVALID_ARGUMENT = 3,
  ASR_STATUS_PARSE = 4,
  ASR_STATUS_IO = 5,
  ASR_STATUS_SELECTION = 6,
  ASR_STATUS_EVALUATION = 7,
  ASR_STATUS_PANIC = 8,
} AsrStatus;

typedef enum AsrBudgetKind {
  // `budget` is a sentence count.
  ASR_BUDGET_KIND_COUNT = 0,
  // `budget` is seconds of estimated speech.
  ASR_BUDGET_KIND_SECONDS = 1,
} AsrBudgetKind;

// Parsed sentences.
typedef struct AsrCorpus AsrCorpus;

// Result of a selection run.
typedef struct AsrSelection AsrSelection;

// Domain term list.
typedef struct AsrTermSet AsrTermSet;

typedef struct AsrSelectParams {
  double alpha;
  double beta;
  double gamma;
  enum AsrBudgetKind budget_kind;
  double budget;
  // Speaking rate for duration estimates.
  double wpm;
  // n-gram order of the perplexity model.
  size_t lm_order;
  // Add-k smoothing constant of the perplexity model.
  double lm_smoothing;
} AsrSelectParams;

typedef struct AsrWerReport {
  double wer;
  // Meaningful only when `has_b_wer`.
  double b_wer;
  bool has_b_wer;
  // Meaningful only when `has_u_wer`.
  double u_wer;
  bool has_u_wer;
  size_t substitutions;
  size_t deletions;
  size_t insertions;
  size_t n_ref;
  size_t n_ref_biased;
  size_t n_ref_unbiased;
  size_t utterances;
} AsrWerReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. The pointer
// stays valid until the next failing call on this thread.
const char *asr_last_error(void);

// Library version as a static string.
const char *asr_version(void);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void asr_string_free(char *s);

// Tokenizes `text` with the default normalization; writes a JSON array of tokens.
//
// # Safety
// `text` must be a valid C string and `out` a valid pointer.
enum AsrStatus asr_tokenize(const char *text, char **out);

// Parses one sentence per line (ids `0..n`), or JSONL records when `jsonl`.
// With `allow_empty`, lines without tokens are kept, as for ASR hypotheses.
//
// # Safety
// `text` must be a valid C string and `out` a valid pointer.
enum AsrStatus asr_corpus_parse(const char *text,
                                bool jsonl,
                                bool allow_empty,
                                struct AsrCorpus **out);

// Loads a corpus file; `.jsonl` files are read as records, others as lines.
//
// # Safety
// `path` must be a valid C string and `out` a valid pointer.
enum AsrStatus asr_corpus_load(const char *path, bool allow_empty, struct AsrCorpus **out);

// Number of sentences; 0 for NULL.
//
// # Safety
// `c` must be NULL or a live corpus handle.
size_t asr_corpus_len(const struct AsrCorpus *c);

// # Safety
// `c` must be NULL or a corpus handle not yet freed.
void asr_corpus_free(struct AsrCorpus *c);

// Moving-average type-token ratio over the concatenated tokens.
//
// # Safety
// `c` must be a live corpus handle and `out` a valid pointer.
enum AsrStatus asr_corpus_mattr(const struct AsrCorpus *c, size_t window, double *out);

// Distinct n-grams over total n-grams, counted within sentences.
//
// # Safety
// `c` must be a live corpus handle and `out` a valid pointer.
enum AsrStatus asr_corpus_distinct_n(const struct AsrCorpus *c, size_t n, double *out);

// Mean sentence perplexity of `c` under an add-k n-gram model trained on
// `training` (or on `c` itself when `training` is NULL).
//
// # Safety
// `c` must be a live corpus handle, `training` NULL or a live corpus handle,
// and `out` a valid pointer.
enum AsrStatus asr_corpus_mean_perplexity(const struct AsrCorpus *c,
                                          const struct AsrCorpus *training,
                                          size_t order,
                                          double smoothing,
                                          double *out);

// Parses a term list: one `term` or `term<TAB>count` per line.
//
// # Safety
// `tsv` must be a valid C string and `out` a valid pointer.
enum AsrStatus asr_terms_parse(const char *tsv, struct AsrTermSet **out);

// Words occurring at least `min_frequency` times in `transcripts` that do
// not occur in `reference_vocab` (newline-separated).
//
// # Safety
// `transcripts` must be a live corpus handle, `reference_vocab` a valid C
// string, and `out` a valid pointer.
enum AsrStatus asr_terms_extract(const struct AsrCorpus *transcripts,
                                 const char *reference_vocab,
                                 size_t min_frequency,
                                 struct AsrTermSet **out);

// # Safety
// `t` must be NULL or a live term-set handle.
size_t asr_terms_len(const struct AsrTermSet *t);

// Whether `word`, after normalization, is a term. False on any bad argument.
//
// # Safety
// `t` must be NULL or a live term-set handle; `word` NULL or a valid C string.
bool asr_terms_contains(const struct AsrTermSet *t, const char *word);

// Writes the term list as `term<TAB>count` lines.
//
// # Safety
// `t` must be a live term-set handle and `out` a valid pointer.
enum AsrStatus asr_terms_to_tsv(const struct AsrTermSet *t, char **out);

// # Safety
// `t` must be NULL or a term-set handle not yet freed.
void asr_terms_free(struct AsrTermSet *t);

// Weights 6:3:1, a one-hour budget at 160 words per minute, trigram model with k = 0.1.
struct AsrSelectParams asr_select_params_default(void);

// Greedy tri-objective selection from `pool` under the budget in `params`.
// Perplexity comes from an n-gram model trained on `lm_training`, or on the
// pool when `lm_training` is NULL.
//
// # Safety
// `pool` and `terms` must be live handles, `lm_training` NULL or a live
// corpus handle, `params` a valid pointer, and `out` a valid pointer.
enum AsrStatus asr_select_greedy(const struct AsrCorpus *pool,
                                 const struct AsrTermSet *terms,
                                 const struct AsrCorpus *lm_training,
                                 const struct AsrSelectParams *params,
                                 struct AsrSelection **out);

// # Safety
// `s` must be NULL or a live selection handle.
size_t asr_selection_len(const struct AsrSelection *s);

// Id of the `index`-th selected sentence, in selection order.
//
// # Safety
// `s` must be a live selection handle and `out` a valid pointer.
enum AsrStatus asr_selection_id(const struct AsrSelection *s, size_t index, char **out);

// Estimated seconds of the selection; 0 for NULL.
//
// # Safety
// `s` must be NULL or a live selection handle.
double asr_selection_total_duration(const struct AsrSelection *s);

// Selected entries as a JSON array with step scores and raw features.
//
// # Safety
// `s` must be a live selection handle and `out` a valid pointer.
enum AsrStatus asr_selection_to_json(const struct AsrSelection *s, char **out);

// # Safety
// `s` must be NULL or a selection handle not yet freed.
void asr_selection_free(struct AsrSelection *s);

// WER, B-WER (term words) and U-WER (other words). Utterances are paired
// by id. Insertions are charged to the class of the inserted word unless
// `unbiased_insertions` is set.
//
// # Safety
// `reference`, `hypothesis` and `terms` must be live handles and `out` a
// valid pointer.
enum AsrStatus asr_evaluate(const struct AsrCorpus *reference,
                            const struct AsrCorpus *hypothesis,
                            const struct AsrTermSet *terms,
                            bool unbiased_insertions,
                            struct AsrWerReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASRDATA_H */
