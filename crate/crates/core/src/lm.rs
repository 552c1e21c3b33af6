//! Perplexity scoring.
//!
//! [`NGramLm`] is a built-in add-k smoothed n-gram model. [`RemoteScorer`]
//! talks to an external LM scoring endpoint. Both implement
//! [`PerplexityScorer`].

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Sentence};
use crate::http::{HttpConfig, JsonEndpoint, TransportError};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("sentence {0:?} has no tokens to score")]
    EmptySentence(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("malformed scorer response: {0}")]
    BadResponse(String),
    #[error("model file {path}: {message}")]
    ModelFile { path: String, message: String },
}

/// Per-token natural-log probabilities and the resulting perplexity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub perplexity: f64,
    pub token_logprobs: Vec<f64>,
}

impl SentenceScore {
    pub fn from_logprobs(token_logprobs: Vec<f64>) -> Self {
        Self {
            perplexity: perplexity_from_logprobs(&token_logprobs),
            token_logprobs,
        }
    }
}

/// `exp(-mean(logprobs))`.
pub fn perplexity_from_logprobs(logprobs: &[f64]) -> f64 {
    let sum: f64 = logprobs.iter().sum();
    (-sum / logprobs.len() as f64).exp()
}

pub trait PerplexityScorer: Sync {
    /// Scores sentences, returning results in input order.
    fn score_batch(&self, sentences: &[&Sentence]) -> Result<Vec<SentenceScore>, LmError>;

    fn score(&self, sentence: &Sentence) -> Result<SentenceScore, LmError> {
        let mut out = self.score_batch(&[sentence])?;
        out.pop()
            .ok_or_else(|| LmError::BadResponse("scorer returned no result".into()))
    }
}

pub fn sentence_perplexity(scorer: &dyn PerplexityScorer, s: &Sentence) -> Result<f64, LmError> {
    if s.tokens.is_empty() {
        return Err(LmError::EmptySentence(s.id.clone()));
    }
    Ok(scorer.score(s)?.perplexity)
}

/// Assigns the same probability `1 / vocab_size` to every token.
#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    pub vocab_size: usize,
}

impl PerplexityScorer for UniformScorer {
    fn score_batch(&self, sentences: &[&Sentence]) -> Result<Vec<SentenceScore>, LmError> {
        let lp = -(self.vocab_size as f64).ln();
        Ok(sentences
            .iter()
            .map(|s| SentenceScore {
                perplexity: self.vocab_size as f64,
                token_logprobs: vec![lp; s.tokens.len()],
            })
            .collect())
    }
}

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_SMOOTHING: f64 = 0.1;

const UNK: u32 = 0;
const BOS: u32 = u32::MAX;
pub const UNK_TOKEN: &str = "<unk>";

/// Add-k smoothed n-gram language model over word tokens.
///
/// `P(w | ctx) = (c(ctx, w) + k) / (c(ctx) + k·|V ∪ {UNK}|)`, where the context
/// is the previous `order - 1` tokens padded with a begin-of-sentence marker.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLm {
    order: usize,
    k: f64,
    /// Token → id; id 0 is reserved for UNK.
    vocab: HashMap<String, u32>,
    counts: HashMap<Vec<u32>, HashMap<u32, u64>>,
    context_totals: HashMap<Vec<u32>, u64>,
}

impl NGramLm {
    pub fn train(corpus: &Corpus, order: usize, k: f64) -> Result<Self, LmError> {
        if order == 0 {
            return Err(LmError::InvalidParameter("order must be at least 1".into()));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(LmError::InvalidParameter(format!("smoothing constant must be positive, got {k}")));
        }
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        // Ids assigned in sorted token order so training is independent of hash state.
        let mut types: Vec<&str> = corpus
            .iter()
            .flat_map(|s| s.tokens.iter().map(String::as_str))
            .collect();
        types.sort_unstable();
        types.dedup();
        let vocab: HashMap<String, u32> = types
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t.to_owned(), i as u32 + 1))
            .collect();
        let mut lm = Self {
            order,
            k,
            vocab,
            counts: HashMap::new(),
            context_totals: HashMap::new(),
        };
        for s in corpus.iter() {
            let ids = lm.ids(&s.tokens);
            for i in 0..ids.len() {
                let ctx = lm.context(&ids, i);
                *lm.counts.entry(ctx.clone()).or_default().entry(ids[i]).or_default() += 1;
                *lm.context_totals.entry(ctx).or_default() += 1;
            }
        }
        Ok(lm)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    /// Vocabulary size including UNK.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 1
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains_key(token)
    }

    fn ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.vocab.get(t).copied().unwrap_or(UNK))
            .collect()
    }

    fn context(&self, ids: &[u32], i: usize) -> Vec<u32> {
        let width = self.order - 1;
        (0..width)
            .map(|j| {
                let back = width - j;
                if i >= back {
                    ids[i - back]
                } else {
                    BOS
                }
            })
            .collect()
    }

    fn prob_ids(&self, ctx: &[u32], w: u32) -> f64 {
        let c_w = self
            .counts
            .get(ctx)
            .and_then(|m| m.get(&w))
            .copied()
            .unwrap_or(0);
        let c_ctx = self.context_totals.get(ctx).copied().unwrap_or(0);
        (c_w as f64 + self.k) / (c_ctx as f64 + self.k * self.vocab_size() as f64)
    }

    /// `P(token | context)`; unknown words (on either side) map to UNK.
    /// `context` holds the preceding tokens, oldest first; only the last
    /// `order - 1` are used and missing positions are begin-of-sentence.
    pub fn prob(&self, context: &[&str], token: &str) -> f64 {
        let mut seq: Vec<String> = context.iter().map(|t| (*t).to_owned()).collect();
        seq.push(token.to_owned());
        let ids = self.ids(&seq);
        let i = ids.len() - 1;
        self.prob_ids(&self.context(&ids, i), ids[i])
    }

    pub fn token_logprobs(&self, tokens: &[String]) -> Vec<f64> {
        let ids = self.ids(tokens);
        (0..ids.len())
            .map(|i| self.prob_ids(&self.context(&ids, i), ids[i]).ln())
            .collect()
    }

    /// Every probability mass over `V ∪ {UNK}` for one context; used by tests.
    pub fn distribution(&self, context: &[&str]) -> Vec<f64> {
        let mut seq: Vec<String> = context.iter().map(|t| (*t).to_owned()).collect();
        seq.push(String::new());
        let ids = self.ids(&seq);
        let ctx = self.context(&ids, ids.len() - 1);
        std::iter::once(UNK)
            .chain(self.vocab.values().copied())
            .map(|w| self.prob_ids(&ctx, w))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut vocab: Vec<(&String, &u32)> = self.vocab.iter().collect();
        vocab.sort_by_key(|(_, id)| **id);
        let id_to_tok = |id: u32| -> String {
            match id {
                BOS => "<s>".to_owned(),
                UNK => UNK_TOKEN.to_owned(),
                _ => vocab[id as usize - 1].0.clone(),
            }
        };
        let mut counts: BTreeMap<(Vec<String>, String), u64> = BTreeMap::new();
        for (ctx, nexts) in &self.counts {
            for (w, c) in nexts {
                counts.insert((ctx.iter().map(|&i| id_to_tok(i)).collect(), id_to_tok(*w)), *c);
            }
        }
        let file = ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_VERSION,
            order: self.order,
            k: self.k,
            vocab: vocab.into_iter().map(|(t, _)| t.clone()).collect(),
            counts: counts
                .into_iter()
                .map(|((context, token), count)| CountEntry { context, token, count })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(format!("unsupported model format {} v{}", file.format, file.version));
        }
        if file.order == 0 || file.k.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err("invalid order or smoothing constant".into());
        }
        let vocab: HashMap<String, u32> = file
            .vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + 1))
            .collect();
        let lookup = |t: &str| -> Result<u32, String> {
            match t {
                "<s>" => Ok(BOS),
                UNK_TOKEN => Ok(UNK),
                _ => vocab.get(t).copied().ok_or_else(|| format!("token {t:?} not in vocabulary")),
            }
        };
        let mut counts: HashMap<Vec<u32>, HashMap<u32, u64>> = HashMap::new();
        let mut context_totals: HashMap<Vec<u32>, u64> = HashMap::new();
        for e in &file.counts {
            if e.context.len() != file.order - 1 {
                return Err(format!("context {:?} has wrong length", e.context));
            }
            let ctx = e.context.iter().map(|t| lookup(t)).collect::<Result<Vec<_>, _>>()?;
            let w = lookup(&e.token)?;
            counts.entry(ctx.clone()).or_default().insert(w, e.count);
            *context_totals.entry(ctx).or_default() += e.count;
        }
        Ok(Self {
            order: file.order,
            k: file.k,
            vocab,
            counts,
            context_totals,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), LmError> {
        fs::write(path, self.to_json()).map_err(|e| LmError::ModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        let err = |message: String| LmError::ModelFile {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_json(&text).map_err(err)
    }
}

const MODEL_FORMAT: &str = "asrdata-ngram";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    k: f64,
    vocab: Vec<String>,
    counts: Vec<CountEntry>,
}

#[derive(Serialize, Deserialize)]
struct CountEntry {
    context: Vec<String>,
    token: String,
    count: u64,
}

impl PerplexityScorer for NGramLm {
    fn score_batch(&self, sentences: &[&Sentence]) -> Result<Vec<SentenceScore>, LmError> {
        sentences
            .iter()
            .map(|s| {
                if s.tokens.is_empty() {
                    return Err(LmError::EmptySentence(s.id.clone()));
                }
                Ok(SentenceScore::from_logprobs(self.token_logprobs(&s.tokens)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteScorerConfig {
    #[serde(flatten)]
    pub http: HttpConfig,
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for RemoteScorerConfig {
    fn default() -> Self {
        Self {
            http: HttpConfig::default(),
            batch_size: 32,
            max_in_flight: 4,
        }
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    sentences: Vec<&'a str>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<SentenceScore>,
}

/// Client for an HTTP perplexity endpoint.
///
/// Request `{"sentences": [..]}`, response
/// `{"scores": [{"perplexity": x, "token_logprobs": [..]}]}`.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    endpoint: JsonEndpoint,
    batch_size: usize,
    max_in_flight: usize,
}

impl RemoteScorer {
    pub fn new(config: RemoteScorerConfig) -> Result<Self, LmError> {
        Ok(Self {
            endpoint: JsonEndpoint::new(config.http)?,
            batch_size: config.batch_size.max(1),
            max_in_flight: config.max_in_flight.max(1),
        })
    }

    fn score_chunk(&self, chunk: &[&Sentence]) -> Result<Vec<SentenceScore>, LmError> {
        let req = ScoreRequest {
            sentences: chunk.iter().map(|s| s.raw_text.as_str()).collect(),
        };
        let resp: ScoreResponse = self.endpoint.post_json(&req)?;
        if resp.scores.len() != chunk.len() {
            return Err(LmError::BadResponse(format!(
                "expected {} scores, got {}",
                chunk.len(),
                resp.scores.len()
            )));
        }
        for (s, score) in chunk.iter().zip(&resp.scores) {
            let valid = score.perplexity.is_finite()
                && score.perplexity >= 1.0
                && score.token_logprobs.iter().all(|lp| lp.is_finite() && *lp <= 0.0);
            if !valid {
                return Err(LmError::BadResponse(format!("invalid score for sentence {:?}", s.id)));
            }
        }
        Ok(resp.scores)
    }
}

impl PerplexityScorer for RemoteScorer {
    fn score_batch(&self, sentences: &[&Sentence]) -> Result<Vec<SentenceScore>, LmError> {
        let chunks: Vec<&[&Sentence]> = sentences.chunks(self.batch_size).collect();
        let mut out = Vec::with_capacity(sentences.len());
        for wave in chunks.chunks(self.max_in_flight) {
            let results: Vec<Result<Vec<SentenceScore>, LmError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|chunk| scope.spawn(move || self.score_chunk(chunk)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("scoring thread panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::NormalizationRules;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::from_texts(texts, &NormalizationRules::default()).unwrap()
    }

    #[test]
    fn add_one_bigram_probability() {
        let lm = NGramLm::train(&corpus(&["a b", "a c"]), 2, 1.0).unwrap();
        assert_eq!(lm.vocab_size(), 4);
        // (1 + 1) / (2 + 4)
        assert!((lm.prob(&["a"], "b") - 2.0 / 6.0).abs() < 1e-15);
        // BOS context seen twice, both followed by "a": (2 + 1) / (2 + 4)
        assert!((lm.prob(&[], "a") - 3.0 / 6.0).abs() < 1e-15);
        // unseen context: uniform over V ∪ {UNK}
        assert!((lm.prob(&["zzz"], "b") - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unigram_ignores_context() {
        let lm = NGramLm::train(&corpus(&["a b", "a c"]), 1, 0.5).unwrap();
        assert_eq!(lm.prob(&["b"], "a"), lm.prob(&["c"], "a"));
        assert!((lm.prob(&[], "a") - 2.5 / (4.0 + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn distributions_sum_to_one() {
        let lm = NGramLm::train(&corpus(&["a b c a", "b c d", "a a b"]), 3, 0.1).unwrap();
        for ctx in [vec![], vec!["a"], vec!["a", "b"], vec!["x", "y"], vec!["b", "c"]] {
            let total: f64 = lm.distribution(&ctx).iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "{ctx:?}: {total}");
        }
    }

    #[test]
    fn training_is_deterministic_and_serializes() {
        let c = corpus(&["the tower", "the final tower", "contact the tower"]);
        let a = NGramLm::train(&c, 3, 0.1).unwrap();
        let b = NGramLm::train(&c, 3, 0.1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let back = NGramLm::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn rejects_bad_parameters() {
        let c = corpus(&["a"]);
        assert!(matches!(NGramLm::train(&c, 0, 1.0), Err(LmError::InvalidParameter(_))));
        assert!(matches!(NGramLm::train(&c, 2, 0.0), Err(LmError::InvalidParameter(_))));
        assert!(matches!(NGramLm::train(&Corpus::default(), 2, 1.0), Err(LmError::EmptyCorpus)));
    }

    #[test]
    fn uniform_scorer_closed_form() {
        let c = corpus(&["one two three four five"]);
        let p = sentence_perplexity(&UniformScorer { vocab_size: 4 }, &c.sentences[0]).unwrap();
        assert_eq!(p, 4.0);
        let lp = UniformScorer { vocab_size: 4 }.score(&c.sentences[0]).unwrap();
        assert!((perplexity_from_logprobs(&lp.token_logprobs) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn certain_token_has_unit_perplexity() {
        assert_eq!(perplexity_from_logprobs(&[0.0]), 1.0);
    }
}
