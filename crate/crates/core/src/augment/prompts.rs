//! Prompt templates with `{name}` placeholders.
//!
//! A template directory may override any of the built-in templates by
//! providing a file of the same name:
//!
//! | file             | placeholders                                                        |
//! |------------------|---------------------------------------------------------------------|
//! | `scenarios.txt`  | `domain_seed`, `count`, `term_clause`                               |
//! | `generate.txt`   | `domain_seed`, `scenario`, `term_clause`, `count`, `language_instruction` |
//! | `translate.txt`  | `text`, `target_language`, `language_instruction`                  |
//! | `paraphrase.txt` | `domain_seed`, `text`, `count`                                      |
//! | `respell.txt`    | `text`                                                              |
//! | `term.txt`       | `term`                                                              |
//! | `keep_term.txt`  | `term`                                                              |
//!
//! `{{` and `}}` produce literal braces.

use std::fs;
use std::path::Path;

use super::AugmentError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    name: String,
    source: String,
}

impl Template {
    pub fn new(name: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            source: source.into(),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Substitutes every placeholder; an unknown placeholder is an error.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, AugmentError> {
        let err = |msg: String| AugmentError::Template {
            template: self.name.clone(),
            message: msg,
        };
        let mut out = String::with_capacity(self.source.len());
        let mut chars = self.source.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            match c {
                '{' if matches!(chars.peek(), Some((_, '{'))) => {
                    chars.next();
                    out.push('{');
                }
                '}' if matches!(chars.peek(), Some((_, '}'))) => {
                    chars.next();
                    out.push('}');
                }
                '{' => {
                    let rest = &self.source[i + 1..];
                    let end = rest.find('}').ok_or_else(|| err(format!("unclosed placeholder at byte {i}")))?;
                    let name = &rest[..end];
                    let value = vars
                        .iter()
                        .find(|(k, _)| *k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| err(format!("unknown placeholder {{{name}}}")))?;
                    out.push_str(value);
                    for _ in 0..name.chars().count() + 1 {
                        chars.next();
                    }
                }
                '}' => return Err(err(format!("stray '}}' at byte {i}"))),
                _ => out.push(c),
            }
        }
        Ok(out)
    }
}

const SCENARIOS: &str = "You are helping build training data for speech recognition in the following domain: {domain_seed}.
List {count} distinct, realistic situations in which people in this domain speak to each other.{term_clause}
Write one situation per line, numbered.";

const GENERATE: &str = "Domain: {domain_seed}
Situation: {scenario}
Write {count} different things a speaker might say out loud in this situation.{term_clause}
{language_instruction}
Write one utterance per line, numbered. Do not add explanations.";

const TRANSLATE: &str = "Translate the following text into {target_language}. {language_instruction}
Output only the translation.

{text}";

const PARAPHRASE: &str = "Domain: {domain_seed}
Rewrite the following utterance in {count} different ways, keeping its meaning and any domain-specific terms.
Write one rewrite per line, numbered.

{text}";

const RESPELL: &str = "Rewrite the sentence below so that a text-to-speech system reads it the way a real speaker might pronounce it: respell some words with ordinary letters to reflect assimilation, elision, or accent-driven substitutions (for example \"Sevem\" for \"Seven\", \"Bo-in\" for \"Boeing\", \"ze\" for \"the\"). Use only ordinary letters, hyphens, and apostrophes; never use phonetic symbols. Output only the rewritten sentence.

{text}";

const TERM: &str = " Every utterance must contain the term \"{term}\".";

const KEEP_TERM: &str = "Keep the term \"{term}\" in English.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub scenarios: Template,
    pub generate: Template,
    pub translate: Template,
    pub paraphrase: Template,
    pub respell: Template,
    pub term: Template,
    pub keep_term: Template,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            scenarios: Template::new("scenarios", SCENARIOS),
            generate: Template::new("generate", GENERATE),
            translate: Template::new("translate", TRANSLATE),
            paraphrase: Template::new("paraphrase", PARAPHRASE),
            respell: Template::new("respell", RESPELL),
            term: Template::new("term", TERM),
            keep_term: Template::new("keep_term", KEEP_TERM),
        }
    }
}

impl PromptTemplates {
    /// Built-in templates, overridden by any `<name>.txt` present in `dir`.
    pub fn load(dir: &Path) -> Result<Self, AugmentError> {
        let mut t = Self::default();
        for slot in [
            &mut t.scenarios,
            &mut t.generate,
            &mut t.translate,
            &mut t.paraphrase,
            &mut t.respell,
            &mut t.term,
            &mut t.keep_term,
        ] {
            let path = dir.join(format!("{}.txt", slot.name));
            match fs::read_to_string(&path) {
                Ok(text) => slot.source = text.trim_end_matches('\n').to_owned(),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(AugmentError::Template {
                    template: path.display().to_string(),
                    message: e.to_string(),
                }),
            }
        }
        Ok(t)
    }

    /// Writes every template into `dir` as an editable starting point.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for t in [
            &self.scenarios,
            &self.generate,
            &self.translate,
            &self.paraphrase,
            &self.respell,
            &self.term,
            &self.keep_term,
        ] {
            fs::write(dir.join(format!("{}.txt", t.name)), format!("{}\n", t.source))?;
        }
        Ok(())
    }
}

/// Human-readable language name for prompt text.
pub fn language_name(tag: &str) -> &str {
    match tag {
        "en" => "English",
        "ja" => "Japanese",
        "zh" => "Chinese",
        "ko" => "Korean",
        "de" => "German",
        "fr" => "French",
        "es" => "Spanish",
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_and_escapes() {
        let t = Template::new("t", "a {x} {{literal}} {y}");
        assert_eq!(t.render(&[("x", "1"), ("y", "two")]).unwrap(), "a 1 {literal} two");
    }

    #[test]
    fn render_rejects_unknown_and_malformed() {
        assert!(Template::new("t", "{nope}").render(&[]).is_err());
        assert!(Template::new("t", "{open").render(&[("open", "")]).is_err());
        assert!(Template::new("t", "close}").render(&[]).is_err());
    }

    #[test]
    fn defaults_render_with_documented_placeholders() {
        let t = PromptTemplates::default();
        t.scenarios
            .render(&[("domain_seed", "d"), ("count", "4"), ("term_clause", "")])
            .unwrap();
        t.generate
            .render(&[
                ("domain_seed", "d"),
                ("scenario", "s"),
                ("term_clause", ""),
                ("count", "10"),
                ("language_instruction", ""),
            ])
            .unwrap();
        t.translate
            .render(&[("text", "x"), ("target_language", "English"), ("language_instruction", "")])
            .unwrap();
        t.paraphrase.render(&[("domain_seed", "d"), ("text", "x"), ("count", "3")]).unwrap();
        t.respell.render(&[("text", "x")]).unwrap();
        t.term.render(&[("term", "x")]).unwrap();
        t.keep_term.render(&[("term", "x")]).unwrap();
    }

    #[test]
    fn directory_overrides() {
        let dir = tempfile::tempdir().unwrap();
        PromptTemplates::default().write_to(dir.path()).unwrap();
        assert_eq!(PromptTemplates::load(dir.path()).unwrap(), PromptTemplates::default());
        fs::write(dir.path().join("respell.txt"), "Respell: {text}\n").unwrap();
        let t = PromptTemplates::load(dir.path()).unwrap();
        assert_eq!(t.respell.render(&[("text", "hi")]).unwrap(), "Respell: hi");
    }
}
