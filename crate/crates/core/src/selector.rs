//! Tri-objective greedy subset selection.
//!
//! Every candidate `s` is scored as
//!
//! ```text
//! S(s) = α·norm(|Vocab(s) \ V| / |s|) + β·norm(perplexity(s)) + γ·norm(terms(s) / |s|)
//! ```
//!
//! where `V` is the vocabulary of the sentences selected so far and `norm` is
//! min–max normalization over the candidates still in the pool at the current
//! step (a constant column normalizes to 0). Selection repeatedly takes the
//! arg-max, with ties going to the lowest sentence id.
//!
//! [`muss_select`] runs the same greedy at three levels: inside each cluster,
//! over the best clusters' representatives, and globally under the final budget.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{count_domain_terms, Corpus, DomainTermSet, Sentence};
use crate::lm::PerplexityScorer;
use crate::textmetrics::{sentence_perplexities, MetricError};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("no measured duration for sentence {0:?}")]
    MissingDuration(String),
    #[error("features cover {features} sentences but the pool has {pool}")]
    FeatureMismatch { features: usize, pool: usize },
    #[error("cluster assignment covers {assigned} sentences but the pool has {pool}")]
    ClusterMismatch { assigned: usize, pool: usize },
    #[error("per-cluster take must be at least 1")]
    InvalidTake,
    #[error(transparent)]
    Scoring(#[from] MetricError),
}

/// Objective weights, normalized to sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Weights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, SelectionError> {
        let parts = [alpha, beta, gamma];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SelectionError::InvalidWeights(format!(
                "weights must be finite and non-negative, got {alpha}:{beta}:{gamma}"
            )));
        }
        let total = alpha + beta + gamma;
        if total <= 0.0 {
            return Err(SelectionError::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(Self {
            alpha: alpha / total,
            beta: beta / total,
            gamma: gamma / total,
        })
    }
}

impl Default for Weights {
    fn default() -> Self {
        Self::new(6.0, 3.0, 1.0).expect("default weights are valid")
    }
}

impl FromStr for Weights {
    type Err = SelectionError;

    /// Parses a ratio such as `"6:3:1"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [a, b, g] = parts.as_slice() else {
            return Err(SelectionError::InvalidWeights(format!("expected alpha:beta:gamma, got {s:?}")));
        };
        let num = |x: &str| {
            x.parse::<f64>()
                .map_err(|e| SelectionError::InvalidWeights(format!("{x:?}: {e}")))
        };
        Self::new(num(a)?, num(b)?, num(g)?)
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.alpha, self.beta, self.gamma)
    }
}

/// The three raw objective values of one candidate at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub new_vocab_gain: f64,
    pub perplexity: f64,
    pub term_density: f64,
}

/// State-independent features, computed once per sentence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticFeatures {
    pub perplexity: f64,
    pub term_density: f64,
}

/// Per-column minima and maxima over the current candidate pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolBounds {
    pub min: RawFeatures,
    pub max: RawFeatures,
}

impl PoolBounds {
    pub fn of<'a>(features: impl IntoIterator<Item = &'a RawFeatures>) -> Option<Self> {
        let mut it = features.into_iter();
        let first = *it.next()?;
        let mut b = PoolBounds { min: first, max: first };
        for f in it {
            b.include(f);
        }
        Some(b)
    }

    fn include(&mut self, f: &RawFeatures) {
        self.min.new_vocab_gain = self.min.new_vocab_gain.min(f.new_vocab_gain);
        self.max.new_vocab_gain = self.max.new_vocab_gain.max(f.new_vocab_gain);
        self.min.perplexity = self.min.perplexity.min(f.perplexity);
        self.max.perplexity = self.max.perplexity.max(f.perplexity);
        self.min.term_density = self.min.term_density.min(f.term_density);
        self.max.term_density = self.max.term_density.max(f.term_density);
    }
}

/// `(x - min) / (max - min)`, or 0 for a constant column.
pub fn min_max(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (x - min) / (max - min)
    } else {
        0.0
    }
}

pub fn score(f: &RawFeatures, bounds: &PoolBounds, w: &Weights) -> f64 {
    w.alpha * min_max(f.new_vocab_gain, bounds.min.new_vocab_gain, bounds.max.new_vocab_gain)
        + w.beta * min_max(f.perplexity, bounds.min.perplexity, bounds.max.perplexity)
        + w.gamma * min_max(f.term_density, bounds.min.term_density, bounds.max.term_density)
}

/// Scores every entry of a pool against that pool's own bounds.
pub fn score_pool(features: &[RawFeatures], w: &Weights) -> Vec<f64> {
    match PoolBounds::of(features) {
        Some(b) => features.iter().map(|f| score(f, &b, w)).collect(),
        None => Vec::new(),
    }
}

pub const DEFAULT_WPM: f64 = 160.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DurationModel {
    /// Word count at a fixed speaking rate.
    HeuristicWpm { wpm: f64 },
    /// Durations measured from synthesized audio, keyed by sentence id.
    Measured { seconds: HashMap<String, f64> },
}

impl Default for DurationModel {
    fn default() -> Self {
        DurationModel::HeuristicWpm { wpm: DEFAULT_WPM }
    }
}

pub fn estimate_duration(s: &Sentence, model: &DurationModel) -> Result<f64, SelectionError> {
    match model {
        DurationModel::HeuristicWpm { wpm } => Ok(s.tokens.len() as f64 / (wpm / 60.0)),
        DurationModel::Measured { seconds } => seconds
            .get(&s.id)
            .copied()
            .ok_or_else(|| SelectionError::MissingDuration(s.id.clone())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "limit")]
pub enum BudgetLimit {
    Count(usize),
    Seconds(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub limit: BudgetLimit,
    #[serde(default)]
    pub duration_model: DurationModel,
}

impl Budget {
    pub fn count(n: usize) -> Self {
        Self {
            limit: BudgetLimit::Count(n),
            duration_model: DurationModel::default(),
        }
    }

    pub fn seconds(s: f64) -> Self {
        Self {
            limit: BudgetLimit::Seconds(s),
            duration_model: DurationModel::default(),
        }
    }

    pub fn with_duration_model(mut self, model: DurationModel) -> Self {
        self.duration_model = model;
        self
    }

    fn validate(&self) -> Result<(), SelectionError> {
        let ok = match self.limit {
            BudgetLimit::Count(n) => n > 0,
            BudgetLimit::Seconds(s) => s > 0.0 && s.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SelectionError::InvalidBudget(format!("limit must be positive: {:?}", self.limit)))
        }
    }

    fn initial(&self) -> f64 {
        match self.limit {
            BudgetLimit::Count(n) => n as f64,
            BudgetLimit::Seconds(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedEntry {
    pub id: String,
    /// Position in the pool passed to the selector.
    pub pool_index: usize,
    /// 0-based greedy step at which the sentence was picked.
    pub step: usize,
    pub score: f64,
    pub features: RawFeatures,
    pub duration: f64,
    pub cumulative_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub selected: Vec<SelectedEntry>,
    /// Union of the token sets of the selected sentences.
    pub vocab: HashSet<String>,
    /// Seconds or sentences left, depending on the budget kind.
    pub remaining_budget: f64,
    /// Candidates dropped because they did not fit the remaining budget.
    pub skipped: Vec<String>,
}

impl SelectionState {
    pub fn ids(&self) -> Vec<&str> {
        self.selected.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn total_duration(&self) -> f64 {
        self.selected.last().map_or(0.0, |e| e.cumulative_duration)
    }
}

/// Compares sentence ids: numerically when both are unsigned integers, else bytewise.
pub fn id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Positive affine map `x → scale·x + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { scale: 1.0, offset: 0.0 };

    fn apply(&self, x: f64) -> f64 {
        if *self == Self::IDENTITY {
            x
        } else {
            self.scale * x + self.offset
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyOptions {
    /// Recompute normalization bounds every `renormalize_every` steps. `1` is
    /// exact; larger values trade exactness for speed on very large pools.
    pub renormalize_every: usize,
    /// Applied to the vocabulary gain before normalization. Min–max
    /// normalization absorbs any positive affine map, so this only exists to
    /// let callers check that invariance on the state-dependent column.
    pub gain_transform: Affine,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            renormalize_every: 1,
            gain_transform: Affine::IDENTITY,
        }
    }
}

/// Pre-computes perplexity and term density for every pool sentence.
pub fn compute_static_features(
    pool: &Corpus,
    scorer: &dyn PerplexityScorer,
    terms: &DomainTermSet,
) -> Result<Vec<StaticFeatures>, SelectionError> {
    let ppl = sentence_perplexities(pool, scorer)?;
    Ok(pool
        .iter()
        .zip(ppl)
        .map(|(s, perplexity)| StaticFeatures {
            perplexity,
            term_density: count_domain_terms(s, terms) as f64 / s.len() as f64,
        })
        .collect())
}

struct Candidate<'a> {
    sentence: &'a Sentence,
    pool_index: usize,
    types: Vec<u32>,
    features: StaticFeatures,
    duration: f64,
}

/// Runs the greedy over `candidates`, returning the state and the step score
/// of each selection.
fn run_greedy(
    candidates: &[Candidate<'_>],
    w: &Weights,
    budget: &Budget,
    opts: &GreedyOptions,
) -> SelectionState {
    let n = candidates.len();
    let is_count = matches!(budget.limit, BudgetLimit::Count(_));
    let mut remaining = budget.initial();

    // Rank by id for tie-breaking.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| id_cmp(&candidates[a].sentence.id, &candidates[b].sentence.id));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let mut postings: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, c) in candidates.iter().enumerate() {
        for &t in &c.types {
            postings.entry(t).or_default().push(i);
        }
    }
    let mut unseen: Vec<usize> = candidates.iter().map(|c| c.types.len()).collect();
    let mut covered: HashSet<u32> = HashSet::new();
    let mut alive: Vec<usize> = (0..n).collect();
    let mut state = SelectionState {
        selected: Vec::new(),
        vocab: HashSet::new(),
        remaining_budget: remaining,
        skipped: Vec::new(),
    };
    let raw = |i: usize, unseen: &[usize]| RawFeatures {
        new_vocab_gain: opts
            .gain_transform
            .apply(unseen[i] as f64 / candidates[i].sentence.len() as f64),
        perplexity: candidates[i].features.perplexity,
        term_density: candidates[i].features.term_density,
    };
    let every = opts.renormalize_every.max(1);
    let mut bounds: Option<PoolBounds> = None;
    let mut step = 0usize;
    let mut cumulative = 0.0;

    while !alive.is_empty() && remaining > 0.0 {
        if !is_count {
            let shortest = alive
                .iter()
                .map(|&i| candidates[i].duration)
                .fold(f64::INFINITY, f64::min);
            if shortest > remaining {
                break;
            }
        }
        if step.is_multiple_of(every) || bounds.is_none() {
            bounds = PoolBounds::of(alive.iter().map(|&i| raw(i, &unseen)).collect::<Vec<_>>().iter());
        }
        let b = bounds.expect("alive is non-empty");
        let mut best: Option<(usize, usize, f64)> = None;
        for (slot, &i) in alive.iter().enumerate() {
            let s = score(&raw(i, &unseen), &b, w);
            let better = match best {
                None => true,
                Some((_, bi, bs)) => s > bs || (s == bs && rank[i] < rank[bi]),
            };
            if better {
                best = Some((slot, i, s));
            }
        }
        let (slot, i, s) = best.expect("alive is non-empty");
        alive.swap_remove(slot);
        let c = &candidates[i];
        let cost = if is_count { 1.0 } else { c.duration };
        if cost > remaining {
            state.skipped.push(c.sentence.id.clone());
            continue;
        }
        let features = raw(i, &unseen);
        remaining -= cost;
        cumulative += c.duration;
        state.selected.push(SelectedEntry {
            id: c.sentence.id.clone(),
            pool_index: c.pool_index,
            step,
            score: s,
            features,
            duration: c.duration,
            cumulative_duration: cumulative,
        });
        for &t in &c.types {
            if covered.insert(t) {
                for &j in &postings[&t] {
                    unseen[j] -= 1;
                }
            }
        }
        state.vocab.extend(c.sentence.tokens.iter().cloned());
        step += 1;
    }
    state.remaining_budget = remaining.max(0.0);
    state
}

fn build_candidates<'a>(
    pool: &'a Corpus,
    indices: &[usize],
    features: &[StaticFeatures],
    model: &DurationModel,
    interner: &HashMap<&'a str, u32>,
) -> Result<Vec<Candidate<'a>>, SelectionError> {
    indices
        .iter()
        .map(|&i| {
            let s = &pool.sentences[i];
            let mut types: Vec<u32> = s.tokens.iter().map(|t| interner[t.as_str()]).collect();
            types.sort_unstable();
            types.dedup();
            Ok(Candidate {
                sentence: s,
                pool_index: i,
                types,
                features: features[i],
                duration: estimate_duration(s, model)?,
            })
        })
        .collect()
}

fn intern(pool: &Corpus) -> HashMap<&str, u32> {
    let mut m = HashMap::new();
    for s in pool.iter() {
        for t in &s.tokens {
            let next = m.len() as u32;
            m.entry(t.as_str()).or_insert(next);
        }
    }
    m
}

fn check_features(pool: &Corpus, features: &[StaticFeatures]) -> Result<(), SelectionError> {
    if features.len() != pool.len() {
        return Err(SelectionError::FeatureMismatch {
            features: features.len(),
            pool: pool.len(),
        });
    }
    Ok(())
}

/// Sequential greedy selection over the whole pool.
///
/// `features[i]` belongs to `pool.sentences[i]`.
pub fn greedy_select(
    pool: &Corpus,
    features: &[StaticFeatures],
    w: &Weights,
    budget: &Budget,
) -> Result<SelectionState, SelectionError> {
    greedy_select_with(pool, features, w, budget, &GreedyOptions::default())
}

pub fn greedy_select_with(
    pool: &Corpus,
    features: &[StaticFeatures],
    w: &Weights,
    budget: &Budget,
    opts: &GreedyOptions,
) -> Result<SelectionState, SelectionError> {
    check_features(pool, features)?;
    budget.validate()?;
    let interner = intern(pool);
    let all: Vec<usize> = (0..pool.len()).collect();
    let candidates = build_candidates(pool, &all, features, &budget.duration_model, &interner)?;
    Ok(run_greedy(&candidates, w, budget, opts))
}

pub const DEFAULT_PER_CLUSTER_TAKE: usize = 200;
pub const DEFAULT_CLUSTER_POOL_CAP: usize = 60_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    /// Representative ids in selection order.
    pub representatives: Vec<String>,
    /// Mean step score of the representatives.
    pub aggregated_score: f64,
    /// How many representatives went into the global pool.
    pub contributed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MussOutcome {
    pub state: SelectionState,
    /// Non-empty clusters, best first.
    pub ranking: Vec<ClusterSummary>,
    /// Pool indices of the candidates passed to the global level, in collection order.
    pub pooled: Vec<usize>,
}

/// Multilevel selection over a clustered pool.
///
/// 1. Within each cluster, greedy-select up to `per_cluster_take`
///    representatives with a cluster-local vocabulary.
/// 2. Rank clusters by the mean step score of their representatives and
///    collect representatives from the best clusters until
///    `cluster_pool_cap` candidates are gathered.
/// 3. Greedy-select from the gathered candidates, with a fresh vocabulary,
///    under `budget`.
///
/// `cluster_of[i]` is the cluster of `pool.sentences[i]`.
#[allow(clippy::too_many_arguments)]
pub fn muss_select(
    pool: &Corpus,
    features: &[StaticFeatures],
    cluster_of: &[usize],
    per_cluster_take: usize,
    cluster_pool_cap: usize,
    w: &Weights,
    budget: &Budget,
    opts: &GreedyOptions,
) -> Result<MussOutcome, SelectionError> {
    check_features(pool, features)?;
    budget.validate()?;
    if cluster_of.len() != pool.len() {
        return Err(SelectionError::ClusterMismatch {
            assigned: cluster_of.len(),
            pool: pool.len(),
        });
    }
    if per_cluster_take == 0 {
        return Err(SelectionError::InvalidTake);
    }
    let k = cluster_of.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); k];
    for (i, &c) in cluster_of.iter().enumerate() {
        members[c].push(i);
    }
    let interner = intern(pool);
    let local_budget = Budget {
        limit: BudgetLimit::Count(per_cluster_take),
        duration_model: budget.duration_model.clone(),
    };

    let mut summaries: Vec<ClusterSummary> = members
        .par_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(cluster, m)| {
            let cands = build_candidates(pool, m, features, &budget.duration_model, &interner)?;
            let st = run_greedy(&cands, w, &local_budget, opts);
            let total: f64 = st.selected.iter().map(|e| e.score).sum();
            Ok(ClusterSummary {
                cluster,
                size: m.len(),
                aggregated_score: total / st.selected.len() as f64,
                representatives: st.selected.into_iter().map(|e| e.id).collect(),
                contributed: 0,
            })
        })
        .collect::<Result<_, SelectionError>>()?;

    summaries.sort_by(|a, b| {
        b.aggregated_score
            .total_cmp(&a.aggregated_score)
            .then(a.cluster.cmp(&b.cluster))
    });

    let index_of: HashMap<&str, usize> = pool.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let mut pooled = Vec::new();
    for summary in &mut summaries {
        let room = cluster_pool_cap.saturating_sub(pooled.len());
        let take = room.min(summary.representatives.len());
        pooled.extend(summary.representatives[..take].iter().map(|id| index_of[id.as_str()]));
        summary.contributed = take;
    }

    let cands = build_candidates(pool, &pooled, features, &budget.duration_model, &interner)?;
    let state = run_greedy(&cands, w, budget, opts);
    Ok(MussOutcome {
        state,
        ranking: summaries,
        pooled,
    })
}
