//! Word alignment and term-aware error rates (WER, B-WER, U-WER).

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DomainTermSet};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("reference corpus is empty")]
    EmptyReference,
    #[error("utterance ids without a counterpart: {0:?}")]
    Unpaired(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum AlignOp {
    Match { word: String },
    Substitution { reference: String, hypothesis: String },
    Deletion { reference: String },
    Insertion { hypothesis: String },
}

impl AlignOp {
    pub fn is_error(&self) -> bool {
        !matches!(self, AlignOp::Match { .. })
    }

    pub fn reference(&self) -> Option<&str> {
        match self {
            AlignOp::Match { word } => Some(word),
            AlignOp::Substitution { reference, .. } | AlignOp::Deletion { reference } => Some(reference),
            AlignOp::Insertion { .. } => None,
        }
    }

    pub fn hypothesis(&self) -> Option<&str> {
        match self {
            AlignOp::Match { word } => Some(word),
            AlignOp::Substitution { hypothesis, .. } | AlignOp::Insertion { hypothesis } => Some(hypothesis),
            AlignOp::Deletion { .. } => None,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            AlignOp::Match { .. } => "C",
            AlignOp::Substitution { .. } => "S",
            AlignOp::Deletion { .. } => "D",
            AlignOp::Insertion { .. } => "I",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Alignment {
    pub ops: Vec<AlignOp>,
}

impl Alignment {
    pub fn cost(&self) -> usize {
        self.ops.iter().filter(|o| o.is_error()).count()
    }

    pub fn reference_side(&self) -> Vec<&str> {
        self.ops.iter().filter_map(AlignOp::reference).collect()
    }

    pub fn hypothesis_side(&self) -> Vec<&str> {
        self.ops.iter().filter_map(AlignOp::hypothesis).collect()
    }
}

/// Minimum-edit alignment with unit costs.
///
/// Among minimum-cost alignments the one with the most matches wins, so an
/// inserted word shifting the hypothesis is reported as one insertion and one
/// deletion rather than a run of substitutions. Remaining ties are broken
/// walking back from the end, preferring match, then substitution, deletion,
/// insertion.
pub fn align<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hypothesis: &[H]) -> Alignment {
    let n = reference.len();
    let m = hypothesis.len();
    let r = |i: usize| reference[i].as_ref();
    let h = |j: usize| hypothesis[j].as_ref();
    // (edits, -matches), compared lexicographically.
    let mut dp = vec![vec![(0u32, 0i32); m + 1]; n + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = (i as u32, 0);
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = (j as u32, 0);
    }
    for i in 1..=n {
        for j in 1..=m {
            let (dc, dm) = dp[i - 1][j - 1];
            let diag = if r(i - 1) == h(j - 1) { (dc, dm - 1) } else { (dc + 1, dm) };
            let del = (dp[i - 1][j].0 + 1, dp[i - 1][j].1);
            let ins = (dp[i][j - 1].0 + 1, dp[i][j - 1].1);
            dp[i][j] = diag.min(del).min(ins);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i][j];
        if i > 0 && j > 0 {
            let (dc, dm) = dp[i - 1][j - 1];
            if r(i - 1) == h(j - 1) && (dc, dm - 1) == here {
                ops.push(AlignOp::Match { word: r(i - 1).to_owned() });
                i -= 1;
                j -= 1;
                continue;
            }
            if r(i - 1) != h(j - 1) && (dc + 1, dm) == here {
                ops.push(AlignOp::Substitution {
                    reference: r(i - 1).to_owned(),
                    hypothesis: h(j - 1).to_owned(),
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && (dp[i - 1][j].0 + 1, dp[i - 1][j].1) == here {
            ops.push(AlignOp::Deletion { reference: r(i - 1).to_owned() });
            i -= 1;
            continue;
        }
        debug_assert!(j > 0 && (dp[i][j - 1].0 + 1, dp[i][j - 1].1) == here);
        ops.push(AlignOp::Insertion { hypothesis: h(j - 1).to_owned() });
        j -= 1;
    }
    ops.reverse();
    Alignment { ops }
}

/// Who is charged for an inserted word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionAttribution {
    /// The class of the inserted hypothesis word.
    #[default]
    HypothesisWord,
    /// Always the unbiased class.
    Unbiased,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl ErrorCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    fn add(&mut self, other: &ErrorCounts) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceResult {
    pub id: String,
    pub alignment: Alignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub wer: f64,
    /// `None` when the reference has no term words.
    pub b_wer: Option<f64>,
    /// `None` when every reference word is a term.
    pub u_wer: Option<f64>,
    pub counts: ErrorCounts,
    pub biased: ErrorCounts,
    pub unbiased: ErrorCounts,
    pub n_ref: usize,
    pub n_ref_biased: usize,
    pub n_ref_unbiased: usize,
    pub utterances: usize,
    #[serde(skip)]
    pub alignments: Vec<UtteranceResult>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per alignment operation: `id, op, ref, hyp, class`.
    pub fn alignments_tsv(&self, terms: &DomainTermSet) -> String {
        let mut out = String::from("id\top\tref\thyp\tclass\n");
        for u in &self.alignments {
            for op in &u.alignment.ops {
                let word = op.reference().or(op.hypothesis()).unwrap_or_default();
                let class = if terms.contains(word) { "biased" } else { "unbiased" };
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    u.id,
                    op.code(),
                    op.reference().unwrap_or("-"),
                    op.hypothesis().unwrap_or("-"),
                    class
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub insertions: InsertionAttribution,
}

/// Aligns paired utterances and tallies errors by term class.
///
/// Substitutions and deletions are charged to the class of the reference
/// word; insertions per `opts.insertions`.
pub fn evaluate(
    reference: &Corpus,
    hypothesis: &Corpus,
    terms: &DomainTermSet,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let hyp_by_id: HashMap<&str, &crate::Sentence> =
        hypothesis.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut unpaired: Vec<String> = reference
        .iter()
        .filter(|s| !hyp_by_id.contains_key(s.id.as_str()))
        .map(|s| s.id.clone())
        .collect();
    let ref_ids: std::collections::HashSet<&str> = reference.iter().map(|s| s.id.as_str()).collect();
    unpaired.extend(
        hypothesis
            .iter()
            .filter(|s| !ref_ids.contains(s.id.as_str()))
            .map(|s| s.id.clone()),
    );
    if !unpaired.is_empty() {
        return Err(EvalError::Unpaired(unpaired));
    }

    let mut biased = ErrorCounts::default();
    let mut unbiased = ErrorCounts::default();
    let mut n_ref_biased = 0;
    let mut n_ref_unbiased = 0;
    let mut alignments = Vec::with_capacity(reference.len());
    for r in reference.iter() {
        let h = hyp_by_id[r.id.as_str()];
        for t in &r.tokens {
            if terms.contains(t) {
                n_ref_biased += 1;
            } else {
                n_ref_unbiased += 1;
            }
        }
        let alignment = align(&r.tokens, &h.tokens);
        for op in &alignment.ops {
            let (word, charged_by_word) = match op {
                AlignOp::Match { .. } => continue,
                AlignOp::Substitution { reference, .. } | AlignOp::Deletion { reference } => (reference, true),
                AlignOp::Insertion { hypothesis } => {
                    (hypothesis, opts.insertions == InsertionAttribution::HypothesisWord)
                }
            };
            let bucket = if charged_by_word && terms.contains(word) {
                &mut biased
            } else {
                &mut unbiased
            };
            match op {
                AlignOp::Substitution { .. } => bucket.substitutions += 1,
                AlignOp::Deletion { .. } => bucket.deletions += 1,
                _ => bucket.insertions += 1,
            }
        }
        alignments.push(UtteranceResult {
            id: r.id.clone(),
            alignment,
        });
    }
    let mut counts = biased;
    counts.add(&unbiased);
    let n_ref = n_ref_biased + n_ref_unbiased;
    let rate = |errors: usize, n: usize| (n > 0).then(|| errors as f64 / n as f64);
    Ok(EvalReport {
        wer: rate(counts.total(), n_ref).unwrap_or(if counts.total() == 0 { 0.0 } else { f64::INFINITY }),
        b_wer: rate(biased.total(), n_ref_biased),
        u_wer: rate(unbiased.total(), n_ref_unbiased),
        counts,
        biased,
        unbiased,
        n_ref,
        n_ref_biased,
        n_ref_unbiased,
        utterances: reference.len(),
        alignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::NormalizationRules;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_alignment() {
        let a = align(&toks("a b c"), &toks("a b c"));
        assert_eq!(a.cost(), 0);
        assert!(a.ops.iter().all(|o| !o.is_error()));
    }

    #[test]
    fn deletions_only() {
        let a = align(&toks("a b"), &Vec::<&str>::new());
        assert_eq!(
            a.ops,
            vec![
                AlignOp::Deletion { reference: "a".into() },
                AlignOp::Deletion { reference: "b".into() }
            ]
        );
    }

    #[test]
    fn shifted_word_is_insert_plus_delete() {
        let a = align(&toks("contact tower on final"), &toks("contact the tower final"));
        assert_eq!(a.cost(), 2);
        assert_eq!(
            a.ops,
            vec![
                AlignOp::Match { word: "contact".into() },
                AlignOp::Insertion { hypothesis: "the".into() },
                AlignOp::Match { word: "tower".into() },
                AlignOp::Deletion { reference: "on".into() },
                AlignOp::Match { word: "final".into() },
            ]
        );
    }

    #[test]
    fn substitution_preferred_over_indel_pair() {
        let a = align(&toks("a b c"), &toks("a x c"));
        assert_eq!(
            a.ops[1],
            AlignOp::Substitution {
                reference: "b".into(),
                hypothesis: "x".into()
            }
        );
    }

    fn corpora(r: &[&str], h: &[&str]) -> (Corpus, Corpus) {
        let rules = NormalizationRules::default();
        (Corpus::from_texts(r, &rules).unwrap(), Corpus::from_texts(h, &rules).unwrap())
    }

    #[test]
    fn worked_example_rates() {
        let (r, h) = corpora(&["contact tower on final"], &["contact the tower final"]);
        let rep = evaluate(&r, &h, &DomainTermSet::from_terms(["tower"]), &EvalOptions::default()).unwrap();
        assert_eq!(rep.wer, 0.5);
        assert_eq!(rep.b_wer, Some(0.0));
        assert_eq!(rep.u_wer, Some(2.0 / 3.0));
        assert_eq!(rep.biased.total() + rep.unbiased.total(), rep.counts.total());
    }

    #[test]
    fn empty_term_set() {
        let (r, h) = corpora(&["a b c d"], &["a c d e"]);
        let rep = evaluate(&r, &h, &DomainTermSet::default(), &EvalOptions::default()).unwrap();
        assert_eq!(rep.b_wer, None);
        assert_eq!(rep.u_wer, Some(rep.wer));
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert!(json["b_wer"].is_null());
    }

    #[test]
    fn insertion_attribution_switch() {
        let (r, h) = corpora(&["on final"], &["on tower final"]);
        let terms = DomainTermSet::from_terms(["tower"]);
        let by_word = evaluate(&r, &h, &terms, &EvalOptions::default()).unwrap();
        assert_eq!(by_word.biased.insertions, 1);
        let all_u = evaluate(&r, &h, &terms, &EvalOptions { insertions: InsertionAttribution::Unbiased }).unwrap();
        assert_eq!(all_u.biased.insertions, 0);
        assert_eq!(all_u.unbiased.insertions, 1);
    }

    #[test]
    fn error_paths() {
        let (r, h) = corpora(&["a"], &["a", "b"]);
        assert_eq!(
            evaluate(&r, &h, &DomainTermSet::default(), &EvalOptions::default()),
            Err(EvalError::Unpaired(vec!["1".into()]))
        );
        assert_eq!(
            evaluate(&Corpus::default(), &h, &DomainTermSet::default(), &EvalOptions::default()),
            Err(EvalError::EmptyReference)
        );
    }

    #[test]
    fn tsv_has_one_row_per_op() {
        let (r, h) = corpora(&["contact tower on final"], &["contact the tower final"]);
        let terms = DomainTermSet::from_terms(["tower"]);
        let rep = evaluate(&r, &h, &terms, &EvalOptions::default()).unwrap();
        let tsv = rep.alignments_tsv(&terms);
        assert_eq!(tsv.lines().count(), 6);
        assert!(tsv.contains("0\tI\t-\tthe\tunbiased"));
    }
}
