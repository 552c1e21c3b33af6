//! Corpus-quality metrics: MATTR, Distinct-n, mean perplexity, average term frequency.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DomainTermSet};
use crate::lm::{LmError, PerplexityScorer};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{0} is undefined for this input")]
    Undefined(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scoring sentence {id:?}: {source}")]
    Scorer {
        id: String,
        #[source]
        source: LmError,
    },
}

pub const DEFAULT_MATTR_WINDOW: usize = 50;

/// Moving-average type-token ratio.
///
/// Mean TTR over every contiguous window of `window` tokens; a list shorter
/// than the window yields its plain TTR.
pub fn mattr<S: AsRef<str>>(tokens: &[S], window: usize) -> Result<f64, MetricError> {
    if window == 0 {
        return Err(MetricError::InvalidArgument("MATTR window must be at least 1".into()));
    }
    if tokens.is_empty() {
        return Err(MetricError::Undefined("MATTR of an empty token list"));
    }
    let toks: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    if toks.len() <= window {
        let unique: HashSet<&str> = toks.iter().copied().collect();
        return Ok(unique.len() as f64 / toks.len() as f64);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &toks[..window] {
        *counts.entry(t).or_default() += 1;
    }
    let mut sum = counts.len() as f64 / window as f64;
    for i in window..toks.len() {
        let out = toks[i - window];
        let c = counts.get_mut(out).expect("outgoing token counted");
        *c -= 1;
        if *c == 0 {
            counts.remove(out);
        }
        *counts.entry(toks[i]).or_default() += 1;
        sum += counts.len() as f64 / window as f64;
    }
    let windows = toks.len() - window + 1;
    Ok(sum / windows as f64)
}

/// Corpus-level MATTR over the concatenation of all sentences in corpus order.
pub fn corpus_mattr(corpus: &Corpus, window: usize) -> Result<f64, MetricError> {
    mattr(&corpus.concatenated_tokens(), window)
}

/// Unique n-grams over total n-gram instances; n-grams never span sentences.
pub fn distinct_n(corpus: &Corpus, n: usize) -> Result<f64, MetricError> {
    if n == 0 {
        return Err(MetricError::InvalidArgument("n must be at least 1".into()));
    }
    let mut unique: HashSet<&[String]> = HashSet::new();
    let mut total = 0usize;
    for s in corpus.iter() {
        for gram in s.tokens.windows(n) {
            unique.insert(gram);
            total += 1;
        }
    }
    if total == 0 {
        return Err(MetricError::Undefined("Distinct-n with zero n-gram instances"));
    }
    Ok(unique.len() as f64 / total as f64)
}

/// Per-sentence perplexities in corpus order. Scoring runs in parallel chunks.
pub fn sentence_perplexities(
    corpus: &Corpus,
    scorer: &dyn PerplexityScorer,
) -> Result<Vec<f64>, MetricError> {
    const CHUNK: usize = 64;
    let chunks: Vec<Vec<f64>> = corpus
        .sentences
        .par_chunks(CHUNK)
        .map(|chunk| {
            let refs: Vec<_> = chunk.iter().collect();
            match scorer.score_batch(&refs) {
                Ok(scores) => Ok(scores.into_iter().map(|s| s.perplexity).collect()),
                // Re-score one by one to attribute the failure.
                Err(_) => chunk
                    .iter()
                    .map(|s| {
                        scorer.score(s).map(|r| r.perplexity).map_err(|source| MetricError::Scorer {
                            id: s.id.clone(),
                            source,
                        })
                    })
                    .collect(),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Arithmetic mean of per-sentence perplexities.
pub fn mean_perplexity(corpus: &Corpus, scorer: &dyn PerplexityScorer) -> Result<f64, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::Undefined("mean perplexity of an empty corpus"));
    }
    let ppl = sentence_perplexities(corpus, scorer)?;
    Ok(ppl.iter().sum::<f64>() / ppl.len() as f64)
}

/// Total occurrences of all terms in the corpus divided by the number of terms.
pub fn avg_term_frequency(corpus: &Corpus, terms: &DomainTermSet) -> Result<f64, MetricError> {
    if terms.is_empty() {
        return Err(MetricError::Undefined("average term frequency with an empty term set"));
    }
    let occurrences: usize = corpus
        .iter()
        .map(|s| crate::corpus::count_domain_terms(s, terms))
        .sum();
    Ok(occurrences as f64 / terms.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mattr: f64,
    pub distinct_n: BTreeMap<usize, f64>,
    pub mean_perplexity: f64,
    pub avg_term_frequency: f64,
}

/// Serialized form of [`MetricsReport`] with fixed field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub mattr: f64,
    pub distinct2: f64,
    pub perplexity: f64,
    pub avg_term: f64,
}

impl MetricsReport {
    pub fn compute(
        corpus: &Corpus,
        terms: &DomainTermSet,
        scorer: &dyn PerplexityScorer,
        window: usize,
    ) -> Result<Self, MetricError> {
        Ok(Self {
            mattr: corpus_mattr(corpus, window)?,
            distinct_n: BTreeMap::from([(1, distinct_n(corpus, 1)?), (2, distinct_n(corpus, 2)?)]),
            mean_perplexity: mean_perplexity(corpus, scorer)?,
            avg_term_frequency: avg_term_frequency(corpus, terms)?,
        })
    }

    pub fn to_file(&self) -> MetricsFile {
        MetricsFile {
            mattr: self.mattr,
            distinct2: self.distinct_n.get(&2).copied().unwrap_or(f64::NAN),
            perplexity: self.mean_perplexity,
            avg_term: self.avg_term_frequency,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::NormalizationRules;
    use crate::lm::{SentenceScore, UniformScorer};
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::from_texts(texts, &NormalizationRules::default()).unwrap()
    }

    #[test]
    fn mattr_examples() {
        assert_eq!(mattr(&["a", "b", "c", "d"], 2).unwrap(), 1.0);
        assert_eq!(mattr(&["a", "a", "a", "a"], 2).unwrap(), 0.5);
        assert_eq!(mattr(&["a", "a", "b"], 10).unwrap(), 2.0 / 3.0);
        assert!(matches!(mattr::<&str>(&[], 2), Err(MetricError::Undefined(_))));
        assert!(matches!(mattr(&["a"], 0), Err(MetricError::InvalidArgument(_))));
    }

    #[test]
    fn distinct_examples() {
        assert!((distinct_n(&corpus(&["a b a b"]), 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(distinct_n(&corpus(&["alpha bravo charlie"]), 2).unwrap(), 1.0);
        assert!(matches!(distinct_n(&corpus(&["a", "b"]), 2), Err(MetricError::Undefined(_))));
    }

    struct Fixed(Vec<f64>);
    impl PerplexityScorer for Fixed {
        fn score_batch(&self, sentences: &[&crate::Sentence]) -> Result<Vec<SentenceScore>, LmError> {
            Ok(sentences
                .iter()
                .map(|s| SentenceScore {
                    perplexity: self.0[s.id.parse::<usize>().unwrap()],
                    token_logprobs: vec![],
                })
                .collect())
        }
    }

    struct Failing;
    impl PerplexityScorer for Failing {
        fn score_batch(&self, sentences: &[&crate::Sentence]) -> Result<Vec<SentenceScore>, LmError> {
            match sentences.iter().find(|s| s.raw_text.contains("bad")) {
                Some(s) => Err(LmError::EmptySentence(s.id.clone())),
                None => UniformScorer { vocab_size: 3 }.score_batch(sentences),
            }
        }
    }

    #[test]
    fn mean_perplexity_examples() {
        let c = corpus(&["x", "y"]);
        assert_eq!(mean_perplexity(&c, &Fixed(vec![10.0, 30.0])).unwrap(), 20.0);
        let one = corpus(&["x"]);
        assert_eq!(mean_perplexity(&one, &Fixed(vec![7.5])).unwrap(), 7.5);
    }

    #[test]
    fn scorer_failure_names_sentence() {
        let c = corpus(&["fine", "bad one", "fine again"]);
        match mean_perplexity(&c, &Failing) {
            Err(MetricError::Scorer { id, .. }) => assert_eq!(id, "1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn avg_term_examples() {
        let c = corpus(&["tower tower", "tower", "tower on final"]);
        let d = DomainTermSet::from_terms(["tower", "wilco"]);
        assert_eq!(avg_term_frequency(&c, &d).unwrap(), 2.0);
        assert_eq!(avg_term_frequency(&corpus(&["on final"]), &DomainTermSet::from_terms(["tower"])).unwrap(), 0.0);
        assert!(avg_term_frequency(&c, &DomainTermSet::default()).is_err());
    }

    #[test]
    fn report_json_field_names() {
        let c = corpus(&["tower one two", "tower three"]);
        let r = MetricsReport::compute(&c, &DomainTermSet::from_terms(["tower"]), &UniformScorer { vocab_size: 5 }, 50)
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["avg_term", "distinct2", "mattr", "perplexity"]);
    }

    proptest! {
        #[test]
        fn mattr_wide_window_is_ttr(toks in proptest::collection::vec("[a-e]", 1..40), extra in 0usize..5) {
            let unique: HashSet<&String> = toks.iter().collect();
            let ttr = unique.len() as f64 / toks.len() as f64;
            prop_assert_eq!(mattr(&toks, toks.len() + extra).unwrap(), ttr);
        }

        #[test]
        fn mattr_invariant_under_renaming(toks in proptest::collection::vec(0u8..6, 1..60), w in 1usize..20) {
            let a: Vec<String> = toks.iter().map(|t| format!("t{t}")).collect();
            let b: Vec<String> = toks.iter().map(|t| format!("renamed{}", 5 - t)).collect();
            prop_assert_eq!(mattr(&a, w).unwrap(), mattr(&b, w).unwrap());
        }

        #[test]
        fn distinct_bounded(sents in proptest::collection::vec("[abc]( [abc]){1,6}", 1..8)) {
            let refs: Vec<&str> = sents.iter().map(String::as_str).collect();
            let d = distinct_n(&corpus(&refs), 2).unwrap();
            prop_assert!(d > 0.0 && d <= 1.0);
        }

        #[test]
        fn avg_term_scales_with_duplication(sents in proptest::collection::vec("[abc]( [abc]){0,5}", 1..6), k in 1usize..4) {
            let refs: Vec<&str> = sents.iter().map(String::as_str).collect();
            let d = DomainTermSet::from_terms(["a", "c"]);
            let base = avg_term_frequency(&corpus(&refs), &d).unwrap();
            let dup: Vec<&str> = std::iter::repeat_n(refs.clone(), k).flatten().collect();
            let scaled = avg_term_frequency(&corpus(&dup), &d).unwrap();
            prop_assert!((scaled - base * k as f64).abs() < 1e-12);
        }
    }
}
