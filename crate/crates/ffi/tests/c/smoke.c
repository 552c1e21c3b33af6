#include <math.h>
#include <stdio.h>
#include <string.h>

#include "asrdata.h"

#define CHECK(expr)                                                          \
  do {                                                                       \
    AsrStatus st_ = (expr);                                                  \
    if (st_ != ASR_STATUS_OK) {                                              \
      fprintf(stderr, "%s:%d: %s -> %d (%s)\n", __FILE__, __LINE__, #expr,   \
              (int)st_, asr_last_error() ? asr_last_error() : "");           \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(void) {
  AsrCorpus *ref = NULL, *hyp = NULL, *pool = NULL;
  AsrTermSet *terms = NULL;
  AsrSelection *sel = NULL;

  CHECK(asr_corpus_parse("the wilco is at gate\nrunway two seven clear\n", false, false, &ref));
  CHECK(asr_corpus_parse("the is at the gate\nrunway two seven clear\n", false, true, &hyp));
  CHECK(asr_terms_parse("wilco\n", &terms));

  AsrWerReport rep;
  CHECK(asr_evaluate(ref, hyp, terms, false, &rep));
  if (rep.n_ref != 9 || fabs(rep.wer - 2.0 / 9.0) > 1e-12 || !rep.has_b_wer || rep.b_wer != 1.0) {
    fprintf(stderr, "unexpected report: wer=%f n_ref=%zu\n", rep.wer, rep.n_ref);
    return 1;
  }

  double mattr = 0.0;
  CHECK(asr_corpus_mattr(ref, 50, &mattr));

  CHECK(asr_corpus_parse("alpha bravo wilco\nalpha bravo\ncharlie delta echo\nwilco roger\n", false, false, &pool));
  AsrSelectParams p = asr_select_params_default();
  p.budget_kind = ASR_BUDGET_KIND_COUNT;
  p.budget = 2;
  CHECK(asr_select_greedy(pool, terms, NULL, &p, &sel));
  if (asr_selection_len(sel) != 2) {
    fprintf(stderr, "selected %zu\n", asr_selection_len(sel));
    return 1;
  }
  char *id = NULL;
  CHECK(asr_selection_id(sel, 0, &id));
  printf("first=%s mattr=%.6f version=%s\n", id, mattr, asr_version());
  asr_string_free(id);

  if (asr_corpus_parse(NULL, false, false, &pool) != ASR_STATUS_NULL_POINTER || asr_last_error() == NULL) {
    fprintf(stderr, "NULL input not rejected\n");
    return 1;
  }

  asr_selection_free(sel);
  asr_terms_free(terms);
  asr_corpus_free(pool);
  asr_corpus_free(hyp);
  asr_corpus_free(ref);
  return 0;
}
