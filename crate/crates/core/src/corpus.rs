//! Corpus ingestion, word tokenization, and domain-term extraction.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: malformed record: {reason}")]
    MalformedRecord {
        source_name: String,
        line: usize,
        reason: String,
    },
    #[error("sentence {id:?} has no tokens after normalization")]
    EmptySentence { id: String },
    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),
}

/// Which alphanumeric characters may appear inside a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptClass {
    /// Any Unicode alphanumeric character.
    #[default]
    Any,
    /// ASCII digits and Latin letters (Basic Latin through Latin Extended-B).
    Latin,
}

impl ScriptClass {
    fn admits(self, c: char) -> bool {
        match self {
            ScriptClass::Any => c.is_alphanumeric(),
            ScriptClass::Latin => {
                c.is_ascii_alphanumeric() || (c.is_alphabetic() && ('\u{C0}'..='\u{24F}').contains(&c))
            }
        }
    }
}

/// Word normalization applied before any counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationRules {
    pub lowercase: bool,
    pub keep_hyphens: bool,
    pub keep_apostrophes: bool,
    pub script: ScriptClass,
}

impl Default for NormalizationRules {
    fn default() -> Self {
        Self {
            lowercase: true,
            keep_hyphens: true,
            keep_apostrophes: true,
            script: ScriptClass::Any,
        }
    }
}

impl NormalizationRules {
    fn is_joiner(&self, c: char) -> bool {
        (self.keep_hyphens && c == '-') || (self.keep_apostrophes && c == '\'')
    }
}

/// Splits `text` into normalized word tokens.
///
/// A token is a maximal run of admitted alphanumerics, optionally joined by
/// intra-word hyphens or apostrophes. Joiners at either end of a run are
/// stripped. Everything else separates tokens.
pub fn tokenize(text: &str, rules: &NormalizationRules) -> Vec<String> {
    let folded: String = if rules.lowercase {
        text.to_lowercase()
    } else {
        text.to_owned()
    };
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        let trimmed = current.trim_matches(|c| rules.is_joiner(c));
        if !trimmed.is_empty() {
            tokens.push(trimmed.to_owned());
        }
        current.clear();
    };
    for c in folded.chars() {
        let c = if c == '\u{2019}' || c == '\u{2018}' { '\'' } else { c };
        if rules.script.admits(c) || rules.is_joiner(c) {
            current.push(c);
        } else {
            flush(&mut current);
        }
    }
    flush(&mut current);
    tokens
}

/// Where a sentence came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub step: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_lang: Option<String>,
    /// Id of the sentence this one was derived from (translation, paraphrase).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub lang: String,
    pub provenance: Provenance,
}

impl Sentence {
    pub fn new(
        id: impl Into<String>,
        raw_text: impl Into<String>,
        lang: impl Into<String>,
        rules: &NormalizationRules,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let raw_text = raw_text.into();
        let tokens = tokenize(&raw_text, rules);
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence { id });
        }
        Ok(Self {
            id,
            raw_text,
            tokens,
            lang: lang.into(),
            provenance: Provenance::default(),
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// On-disk JSONL record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentenceRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl From<&Sentence> for SentenceRecord {
    fn from(s: &Sentence) -> Self {
        let provenance = (s.provenance != Provenance::default()).then(|| s.provenance.clone());
        Self {
            id: Some(s.id.clone()),
            text: s.raw_text.clone(),
            lang: Some(s.lang.clone()),
            provenance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    PlainLines,
}

impl CorpusFormat {
    /// Guesses the format from the file extension (`.jsonl`/`.json` → JSONL).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::PlainLines,
        }
    }
}

pub const DEFAULT_LANG: &str = "en";

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub source: String,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids.
    pub fn new(source: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(sentences.len());
        for s in &sentences {
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self {
            sentences,
            source: source.into(),
        })
    }

    /// Builds a corpus from plain strings with positional ids `0..n`.
    pub fn from_texts<S: AsRef<str>>(
        texts: &[S],
        rules: &NormalizationRules,
    ) -> Result<Self, CorpusError> {
        let sentences = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(i.to_string(), t.as_ref(), DEFAULT_LANG, rules))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new("<memory>", sentences)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sentence> {
        self.sentences.iter()
    }

    /// All tokens in corpus order.
    pub fn concatenated_tokens(&self) -> Vec<&str> {
        self.sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(String::as_str))
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&serde_json::to_string(&SentenceRecord::from(s)).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Stable id for a JSONL record that lacks one.
fn auto_id(position: usize, text: &str) -> String {
    let mut h = Sha256::new();
    h.update(position.to_le_bytes());
    h.update(text.as_bytes());
    hex::encode(&h.finalize()[..8])
}

pub fn load_corpus(
    path: &Path,
    format: CorpusFormat,
    rules: &NormalizationRules,
) -> Result<Corpus, CorpusError> {
    load_records(path, format, rules, false)
}

/// Like [`load_corpus`] but admits records with no tokens, as ASR hypotheses
/// may legitimately be empty.
pub fn load_transcripts(
    path: &Path,
    format: CorpusFormat,
    rules: &NormalizationRules,
) -> Result<Corpus, CorpusError> {
    load_records(path, format, rules, true)
}

fn load_records(
    path: &Path,
    format: CorpusFormat,
    rules: &NormalizationRules,
    allow_empty: bool,
) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_records(&text, &path.display().to_string(), format, rules, allow_empty)
}

/// Parses corpus text already in memory; `source_name` appears in errors.
/// With `allow_empty`, records without tokens are kept (ASR hypotheses may be empty).
pub fn parse_records(
    text: &str,
    source_name: &str,
    format: CorpusFormat,
    rules: &NormalizationRules,
    allow_empty: bool,
) -> Result<Corpus, CorpusError> {
    let mut sentences = Vec::new();
    let mut seen = HashSet::new();
    let mut position = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| CorpusError::MalformedRecord {
            source_name: source_name.to_owned(),
            line: lineno,
            reason,
        };
        let (id, text, lang, provenance) = match format {
            CorpusFormat::PlainLines => (position.to_string(), line.to_owned(), DEFAULT_LANG.to_owned(), None),
            CorpusFormat::Jsonl => {
                let rec: SentenceRecord =
                    serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
                let id = rec.id.unwrap_or_else(|| auto_id(position, &rec.text));
                let lang = rec.lang.unwrap_or_else(|| DEFAULT_LANG.to_owned());
                (id, rec.text, lang, rec.provenance)
            }
        };
        if !seen.insert(id.clone()) {
            return Err(malformed(format!("duplicate id {id:?}")));
        }
        let sentence = if allow_empty {
            Sentence {
                tokens: tokenize(&text, rules),
                id,
                raw_text: text,
                lang,
                provenance: Provenance::default(),
            }
        } else {
            Sentence::new(id, text, lang, rules).map_err(|e| malformed(e.to_string()))?
        }
        .with_provenance(provenance.unwrap_or_default());
        sentences.push(sentence);
        position += 1;
    }
    Ok(Corpus {
        sentences,
        source: source_name.to_owned(),
    })
}

/// Reads a reference vocabulary (one entry per line), normalizing each entry
/// with the same tokenizer used for corpora.
pub fn load_reference_vocab(
    path: &Path,
    rules: &NormalizationRules,
) -> Result<HashSet<String>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text.lines().flat_map(|l| tokenize(l, rules)).collect())
}

pub const DEFAULT_MIN_TERM_FREQUENCY: usize = 2;

/// Domain-specific terms with their occurrence counts in the evaluation transcripts.
///
/// Sets loaded from an operational lexicon without counts store a frequency of 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTermSet {
    pub terms: BTreeMap<String, usize>,
}

impl DomainTermSet {
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            terms: terms.into_iter().map(|t| (t.into(), 0)).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.terms.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.terms.iter().map(|(t, &c)| (t.as_str(), c))
    }

    /// `term<TAB>count` per line, sorted by term.
    pub fn to_tsv(&self) -> String {
        self.terms
            .iter()
            .map(|(t, c)| format!("{t}\t{c}\n"))
            .collect()
    }

    /// Parses a term file: `term<TAB>count` or bare `term` per line. Terms are
    /// normalized; a line normalizing to more than one token is rejected.
    pub fn parse(text: &str, source_name: &str, rules: &NormalizationRules) -> Result<Self, CorpusError> {
        let mut terms = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: String| CorpusError::MalformedRecord {
                source_name: source_name.to_owned(),
                line: idx + 1,
                reason,
            };
            let (term, count) = match line.split_once('\t') {
                Some((t, c)) => (
                    t,
                    c.trim()
                        .parse::<usize>()
                        .map_err(|e| malformed(format!("bad count {c:?}: {e}")))?,
                ),
                None => (line, 0),
            };
            let toks = tokenize(term, rules);
            match toks.as_slice() {
                [single] => {
                    terms.insert(single.clone(), count);
                }
                [] => return Err(malformed(format!("term {term:?} is empty after normalization"))),
                _ => return Err(malformed(format!("term {term:?} is not a single word"))),
            }
        }
        Ok(Self { terms })
    }

    pub fn load(path: &Path, rules: &NormalizationRules) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string(), rules)
    }
}

/// Terms occurring at least `min_frequency` times in `eval_transcripts` that are
/// absent from `reference_vocab`.
pub fn extract_domain_terms(
    eval_transcripts: &Corpus,
    reference_vocab: &HashSet<String>,
    min_frequency: usize,
) -> DomainTermSet {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &eval_transcripts.sentences {
        for t in &s.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let terms = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_frequency && !reference_vocab.contains(*t))
        .map(|(t, c)| (t.to_owned(), c))
        .collect();
    DomainTermSet { terms }
}

/// Number of token positions in `s` holding a domain term.
pub fn count_domain_terms(s: &Sentence, d: &DomainTermSet) -> usize {
    s.tokens.iter().filter(|t| d.contains(t)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn rules() -> NormalizationRules {
        NormalizationRules::default()
    }

    #[test]
    fn tokenize_strips_case_and_punctuation() {
        assert_eq!(
            tokenize("Contact Tower, on final.", &rules()),
            vec!["contact", "tower", "on", "final"]
        );
        assert!(tokenize("", &rules()).is_empty());
    }

    #[test]
    fn tokenize_keeps_intra_word_joiners() {
        assert_eq!(tokenize("Hotel-Seven", &rules()), vec!["hotel-seven"]);
        assert_eq!(tokenize("don’t -stop- 'now'", &rules()), vec!["don't", "stop", "now"]);
        let no_hyphen = NormalizationRules {
            keep_hyphens: false,
            ..rules()
        };
        assert_eq!(tokenize("Hotel-Seven", &no_hyphen), vec!["hotel", "seven"]);
    }

    #[test]
    fn latin_script_drops_other_scripts() {
        let latin = NormalizationRules {
            script: ScriptClass::Latin,
            ..rules()
        };
        assert_eq!(tokenize("café 東京 tower", &latin), vec!["café", "tower"]);
        assert_eq!(tokenize("café 東京 tower", &rules()), vec!["café", "東京", "tower"]);
    }

    #[test]
    fn plain_corpus_gets_positional_ids() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "one two\nthree four\n\nfive six").unwrap();
        let c = load_corpus(f.path(), CorpusFormat::PlainLines, &rules()).unwrap();
        let ids: Vec<_> = c.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["0", "1", "2"]);
    }

    #[test]
    fn jsonl_corpus_preserves_lang_and_rejects_duplicates() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"a","text":"hello there","lang":"en"}}"#).unwrap();
        writeln!(f, r#"{{"id":"b","text":"こんにちは 世界","lang":"ja"}}"#).unwrap();
        writeln!(f, r#"{{"text":"no id here"}}"#).unwrap();
        let c = load_corpus(f.path(), CorpusFormat::Jsonl, &rules()).unwrap();
        assert_eq!(c.sentences[0].lang, "en");
        assert_eq!(c.sentences[1].lang, "ja");
        assert_eq!(c.sentences[2].id.len(), 16);

        let mut dup = tempfile::NamedTempFile::new().unwrap();
        writeln!(dup, r#"{{"id":"a","text":"x y"}}"#).unwrap();
        writeln!(dup, r#"{{"id":"a","text":"z w"}}"#).unwrap();
        match load_corpus(dup.path(), CorpusFormat::Jsonl, &rules()) {
            Err(CorpusError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"text":"fine"}}"#).unwrap();
        writeln!(f, "{{not json").unwrap();
        let err = load_corpus(f.path(), CorpusFormat::Jsonl, &rules()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRecord { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_corpus(Path::new("/nonexistent/x.txt"), CorpusFormat::PlainLines, &rules());
        assert!(matches!(err, Err(CorpusError::Io { .. })));
    }

    #[test]
    fn extract_terms_applies_floor_and_reference_vocab() {
        let mut texts = vec!["wilco"; 3];
        texts.extend(["hello"; 5]);
        let c = Corpus::from_texts(&texts, &rules()).unwrap();
        let vocab: HashSet<String> = ["hello".to_owned()].into();
        let d = extract_domain_terms(&c, &vocab, 2);
        assert_eq!(d.terms, BTreeMap::from([("wilco".to_owned(), 3)]));

        let once = Corpus::from_texts(&["wilco"], &rules()).unwrap();
        assert!(extract_domain_terms(&once, &vocab, 2).is_empty());
    }

    #[test]
    fn count_terms_with_multiplicity() {
        let d = DomainTermSet::from_terms(["tower"]);
        let s = Sentence::new("0", "contact tower on final", "en", &rules()).unwrap();
        assert_eq!(count_domain_terms(&s, &d), 1);
        let s = Sentence::new("1", "tower tower", "en", &rules()).unwrap();
        assert_eq!(count_domain_terms(&s, &d), 2);
    }

    #[test]
    fn term_file_round_trip() {
        let d = DomainTermSet {
            terms: BTreeMap::from([("wilco".to_owned(), 3), ("squawk".to_owned(), 2)]),
        };
        let back = DomainTermSet::parse(&d.to_tsv(), "t", &rules()).unwrap();
        assert_eq!(back, d);
        assert!(DomainTermSet::parse("two words\n", "t", &rules()).is_err());
        let bare = DomainTermSet::parse("Wilco\n# comment\n", "t", &rules()).unwrap();
        assert!(bare.contains("wilco"));
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in "\\PC{0,60}") {
            let once = tokenize(&text, &rules());
            let twice = tokenize(&once.join(" "), &rules());
            prop_assert_eq!(&once, &twice);
            for t in &once {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }

        #[test]
        fn term_count_bounded_by_length(words in proptest::collection::vec("[abc]{1,2}", 1..12)) {
            let s = Sentence::new("x", words.join(" "), "en", &rules()).unwrap();
            let d = DomainTermSet::from_terms(["a", "bc"]);
            prop_assert!(count_domain_terms(&s, &d) <= s.len());
        }
    }
}
