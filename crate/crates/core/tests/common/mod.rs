//! Slow, obviously-correct reference implementations used as test oracles.
//!
//! Nothing here shares code with the library beyond plain data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use asrdata::corpus::{Corpus, NormalizationRules, Sentence};
use asrdata::selector::StaticFeatures;

pub fn rules() -> NormalizationRules {
    NormalizationRules::default()
}

/// Corpus whose ids are `0..n` and whose tokens are exactly the given words.
pub fn corpus_of(sentences: &[Vec<String>]) -> Corpus {
    let texts: Vec<String> = sentences.iter().map(|s| s.join(" ")).collect();
    Corpus::from_texts(&texts, &rules()).unwrap()
}

pub fn random_words(rng: &mut impl Rng, vocab: usize, min_len: usize, max_len: usize) -> Vec<String> {
    let n = rng.gen_range(min_len..=max_len);
    (0..n).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
}

fn naive_ids_less(a: &str, b: &str) -> bool {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) if x != y => x < y,
        _ => a < b,
    }
}

fn norm(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Naive per-step greedy: recomputes every feature and every bound from
/// scratch at each step. `durations` of `None` means a count budget.
///
/// Returns `(id, step score)` in selection order.
pub fn naive_greedy(
    pool: &Corpus,
    features: &[StaticFeatures],
    weights: (f64, f64, f64),
    budget: f64,
    durations: Option<&[f64]>,
) -> Vec<(String, f64)> {
    let (a, b, g) = weights;
    let mut alive: Vec<usize> = (0..pool.len()).collect();
    let mut vocab: HashSet<&str> = HashSet::new();
    let mut remaining = budget;
    let mut out = Vec::new();
    while !alive.is_empty() && remaining > 0.0 {
        if let Some(d) = durations {
            if alive.iter().all(|&i| d[i] > remaining) {
                break;
            }
        }
        let raw: Vec<[f64; 3]> = alive
            .iter()
            .map(|&i| {
                let s = &pool.sentences[i];
                let types: HashSet<&str> = s.tokens.iter().map(String::as_str).collect();
                let fresh = types.iter().filter(|t| !vocab.contains(*t)).count();
                [
                    fresh as f64 / s.tokens.len() as f64,
                    features[i].perplexity,
                    features[i].term_density,
                ]
            })
            .collect();
        let lo = |c: usize| raw.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
        let hi = |c: usize| raw.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
        let (l, h) = ([lo(0), lo(1), lo(2)], [hi(0), hi(1), hi(2)]);
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (slot, r) in raw.iter().enumerate() {
            let s = a * norm(r[0], l[0], h[0]) + b * norm(r[1], l[1], h[1]) + g * norm(r[2], l[2], h[2]);
            let id = &pool.sentences[alive[slot]].id;
            if s > best_score || (s == best_score && naive_ids_less(id, &pool.sentences[alive[best]].id)) {
                best = slot;
                best_score = s;
            }
        }
        let i = alive.remove(best);
        let cost = durations.map_or(1.0, |d| d[i]);
        if cost > remaining {
            continue;
        }
        remaining -= cost;
        vocab.extend(pool.sentences[i].tokens.iter().map(String::as_str));
        out.push((pool.sentences[i].id.clone(), best_score));
    }
    out
}

/// Minimum edit distance by exhaustive search over every alignment, pruned
/// only by branches that already cost at least the best complete alignment.
pub fn exhaustive_edit_distance<T: PartialEq>(r: &[T], h: &[T]) -> usize {
    fn go<T: PartialEq>(r: &[T], h: &[T], cost: usize, best: &mut usize) {
        if cost >= *best {
            return;
        }
        match (r.split_first(), h.split_first()) {
            (None, None) => *best = cost,
            (Some(_), None) => *best = (*best).min(cost + r.len()),
            (None, Some(_)) => *best = (*best).min(cost + h.len()),
            (Some((x, rr)), Some((y, hh))) => {
                go(rr, hh, cost + usize::from(x != y), best);
                go(rr, h, cost + 1, best);
                go(r, hh, cost + 1, best);
            }
        }
    }
    let mut best = r.len() + h.len() + 1;
    go(r, h, 0, &mut best);
    best
}

pub fn naive_ttr(tokens: &[&str]) -> f64 {
    let distinct: Vec<&&str> = {
        let mut v: Vec<&&str> = tokens.iter().collect();
        v.sort();
        v.dedup();
        v
    };
    distinct.len() as f64 / tokens.len() as f64
}

/// Mean TTR over all windows, each counted from scratch.
pub fn naive_mattr(tokens: &[&str], window: usize) -> f64 {
    if tokens.len() <= window {
        return naive_ttr(tokens);
    }
    let windows: Vec<f64> = tokens.windows(window).map(naive_ttr).collect();
    windows.iter().sum::<f64>() / windows.len() as f64
}

pub fn naive_distinct_n(sentences: &[Vec<String>], n: usize) -> f64 {
    let mut grams: Vec<Vec<String>> = Vec::new();
    for s in sentences {
        if s.len() >= n {
            for i in 0..=s.len() - n {
                grams.push(s[i..i + n].to_vec());
            }
        }
    }
    let total = grams.len();
    grams.sort();
    grams.dedup();
    grams.len() as f64 / total as f64
}

/// Counts every whitespace-separated word by linear scans, then applies the
/// frequency floor and vocabulary exclusion.
pub fn brute_force_terms(texts: &[String], vocab: &HashSet<String>, min_freq: usize) -> BTreeMap<String, usize> {
    let words: Vec<&str> = texts.iter().flat_map(|t| t.split_whitespace()).collect();
    let mut out = BTreeMap::new();
    for &w in &words {
        if out.contains_key(w) {
            continue;
        }
        let c = words.iter().filter(|&&x| x == w).count();
        if c >= min_freq && !vocab.contains(w) {
            out.insert(w.to_owned(), c);
        }
    }
    out
}

/// Lowest within-cluster sum of squares over every split into two non-empty parts.
pub fn best_two_partition(points: &[Vec<f64>]) -> (f64, Vec<bool>) {
    let n = points.len();
    let sse = |mask: u32, side: bool| {
        let members: Vec<&Vec<f64>> = (0..n)
            .filter(|&i| ((mask >> i) & 1 == 1) == side)
            .map(|i| &points[i])
            .collect();
        let dim = points[0].len();
        let mean: Vec<f64> = (0..dim)
            .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
            .collect();
        members
            .iter()
            .map(|p| p.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
            .sum::<f64>()
    };
    let mut best = (f64::INFINITY, vec![]);
    // Point 0 always sits on the `false` side; every other subset is tried.
    for mask in (2u32..(1 << n)).step_by(2) {
        let total = sse(mask, true) + sse(mask, false);
        if total < best.0 {
            best = (total, (0..n).map(|i| (mask >> i) & 1 == 1).collect());
        }
    }
    best
}

/// Same partition up to relabelling.
pub fn same_partition(a: &[usize], b: &[bool]) -> bool {
    let mut map: HashMap<usize, bool> = HashMap::new();
    a.iter().zip(b).all(|(x, y)| *map.entry(*x).or_insert(*y) == *y)
        && map.values().collect::<HashSet<_>>().len() == map.len()
}

/// Random dyadic value in `[0, hi)` with 1/16 resolution, exact under the
/// power-of-two affine maps used by the invariance checks.
pub fn dyadic(rng: &mut impl Rng, hi: u32) -> f64 {
    rng.gen_range(0..hi * 16) as f64 / 16.0
}

pub fn shuffled<T: Clone>(rng: &mut impl Rng, xs: &[T]) -> Vec<T> {
    let mut v = xs.to_vec();
    v.shuffle(rng);
    v
}

pub fn sentence(id: &str, text: &str) -> Sentence {
    Sentence::new(id, text, "en", &rules()).unwrap()
}
