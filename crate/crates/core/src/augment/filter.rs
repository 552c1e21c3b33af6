//! Length and character-set checks applied at every generation stage boundary.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthConstraint {
    pub lang: String,
    pub min_words: usize,
    pub max_words: usize,
}

impl LengthConstraint {
    pub fn new(lang: impl Into<String>, min_words: usize, max_words: usize) -> Self {
        assert!(min_words <= max_words, "min_words > max_words");
        Self {
            lang: lang.into(),
            min_words,
            max_words,
        }
    }

    pub fn admits(&self, words: usize) -> bool {
        (self.min_words..=self.max_words).contains(&words)
    }
}

pub fn default_constraints() -> Vec<LengthConstraint> {
    vec![
        LengthConstraint::new("en", 5, 200),
        LengthConstraint::new("ja", 5, 100),
        LengthConstraint::new("zh", 5, 100),
    ]
}

fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{3040}'..='\u{309F}'   // hiragana
        | '\u{30A0}'..='\u{30FF}' // katakana
        | '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{FF66}'..='\u{FF9F}')
}

fn is_cjk_punct(c: char) -> bool {
    matches!(c, '\u{3000}'..='\u{303F}' | '\u{FF01}'..='\u{FF65}' | '\u{30FB}' | '\u{30FC}')
}

fn is_latin_text(c: char) -> bool {
    (' '..='~').contains(&c)
        || (c.is_alphabetic() && ('\u{C0}'..='\u{24F}').contains(&c))
        || matches!(c, '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}')
}

/// Whether `c` may appear in text tagged `lang`. Latin text is always allowed
/// so that English domain terms can sit inside Japanese or Chinese sentences.
pub fn char_allowed(lang: &str, c: char) -> bool {
    if is_latin_text(c) {
        return true;
    }
    match lang {
        "ja" => is_cjk(c) || is_cjk_punct(c),
        "zh" => ('\u{3400}'..='\u{4DBF}').contains(&c)
            || ('\u{4E00}'..='\u{9FFF}').contains(&c)
            || ('\u{F900}'..='\u{FAFF}').contains(&c)
            || is_cjk_punct(c),
        _ => false,
    }
}

pub fn text_allowed(lang: &str, text: &str) -> bool {
    text.chars().all(|c| char_allowed(lang, c))
}

/// Word count used by the length constraints: each CJK character counts as a
/// word, as does each whitespace- or punctuation-delimited Latin run.
pub fn word_count(text: &str) -> usize {
    let mut n = 0;
    let mut in_word = false;
    for c in text.chars() {
        if is_cjk(c) {
            n += 1;
            in_word = false;
        } else if c.is_alphanumeric() || ((c == '\'' || c == '-' || c == '\u{2019}') && in_word) {
            if !in_word {
                n += 1;
                in_word = true;
            }
        } else {
            in_word = false;
        }
    }
    n
}

pub fn is_valid(s: &Sentence, constraints: &[LengthConstraint]) -> bool {
    let Some(lc) = constraints.iter().find(|c| c.lang == s.lang) else {
        return false;
    };
    lc.admits(word_count(&s.raw_text)) && text_allowed(&s.lang, &s.raw_text)
}

/// Keeps valid sentences in order, dropping later byte-identical duplicates.
/// Sentences whose language has no constraint are dropped.
pub fn validity_filter(sentences: Vec<Sentence>, constraints: &[LengthConstraint]) -> Vec<Sentence> {
    let mut seen = HashSet::new();
    sentences
        .into_iter()
        .filter(|s| is_valid(s, constraints) && seen.insert(s.raw_text.clone()))
        .collect()
}
