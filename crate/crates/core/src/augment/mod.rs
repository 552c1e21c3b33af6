//! LLM-driven corpus generation, validity filtering, and phonetic respelling.
//!
//! Generation runs as a fixed dataflow:
//!
//! 1. scenarios, `scenario_multiplier` per term, models assigned round-robin
//! 2. `sentences_per_prompt` sentences per scenario × prompt language × model
//! 3. non-target-language sentences translated back to the target language
//! 4. `sentences_per_prompt` paraphrases per sentence
//! 5. validity filter and deduplication
//!
//! Client calls run on a bounded pool, but every output list is ordered by
//! input order and then fan-out index, so results never depend on timing.

pub mod filter;
pub mod llm;
pub mod mock;
pub mod prompts;
pub mod respell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{NormalizationRules, Provenance, Sentence};
use crate::http::TransportError;

pub use filter::{default_constraints, validity_filter, LengthConstraint};
pub use llm::{CachedClient, ChatRequest, HttpLlmClient, LlmClient, ModelConfig, Task};
pub use mock::MockLlm;
pub use prompts::PromptTemplates;
pub use respell::{mix_respelled, respell, MixEntry, RespelledPair};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("no endpoint configured for model {0}")]
    NoEndpoint(String),
    #[error("response cache: {0}")]
    Cache(String),
    #[error("empty response for {context}")]
    EmptyResponse { context: String },
    #[error("{context}: wanted {wanted} items, got {got}")]
    ShortResponse { context: String, wanted: usize, got: usize },
    #[error("every sentence generated for {context} was filtered out")]
    AllFiltered { context: String },
    #[error("template {template}: {message}")]
    Template { template: String, message: String },
    #[error("invalid generation plan: {0}")]
    InvalidPlan(String),
}

/// A recoverable problem recorded instead of aborting the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationPlan {
    pub domain_seed: String,
    pub terms: Vec<String>,
    pub scenario_multiplier: usize,
    pub prompt_languages: Vec<String>,
    pub sentences_per_prompt: usize,
    pub models: Vec<ModelConfig>,
    pub target_lang: String,
    pub max_concurrency: usize,
}

impl Default for GenerationPlan {
    fn default() -> Self {
        Self {
            domain_seed: String::new(),
            terms: Vec::new(),
            scenario_multiplier: 4,
            prompt_languages: vec!["en".into()],
            sentences_per_prompt: 10,
            models: vec![ModelConfig::new("model-a", 1.0, 1.0), ModelConfig::new("model-b", 0.7, 0.8)],
            target_lang: "en".into(),
            max_concurrency: 4,
        }
    }
}

impl GenerationPlan {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |m: &str| Err(AugmentError::InvalidPlan(m.into()));
        if self.domain_seed.trim().is_empty() {
            return bad("domain_seed is empty");
        }
        if self.scenario_multiplier == 0 {
            return bad("scenario_multiplier must be at least 1");
        }
        if self.sentences_per_prompt == 0 {
            return bad("sentences_per_prompt must be at least 1");
        }
        if self.models.is_empty() {
            return bad("no models configured");
        }
        if self.prompt_languages.is_empty() {
            return bad("no prompt languages");
        }
        Ok(())
    }

    /// `scenario_multiplier × max(1, |terms|)`.
    pub fn scenario_count(&self) -> usize {
        self.scenario_multiplier * self.terms.len().max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    pub model: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutput {
    pub scenarios: Vec<Scenario>,
    #[serde(skip)]
    pub sentences: Vec<Sentence>,
    pub warnings: Vec<Warning>,
}

pub struct Generator<'a> {
    plan: &'a GenerationPlan,
    templates: &'a PromptTemplates,
    constraints: &'a [LengthConstraint],
    rules: NormalizationRules,
    client: &'a dyn LlmClient,
    pool: rayon::ThreadPool,
}

impl<'a> Generator<'a> {
    pub fn new(
        plan: &'a GenerationPlan,
        templates: &'a PromptTemplates,
        constraints: &'a [LengthConstraint],
        client: &'a dyn LlmClient,
    ) -> Result<Self, AugmentError> {
        plan.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.max_concurrency.max(1))
            .build()
            .map_err(|e| AugmentError::InvalidPlan(e.to_string()))?;
        Ok(Self {
            plan,
            templates,
            constraints,
            rules: NormalizationRules::default(),
            client,
            pool,
        })
    }

    fn model_for(&self, name: Option<&str>) -> &ModelConfig {
        name.and_then(|n| self.plan.models.iter().find(|m| m.id == n))
            .unwrap_or(&self.plan.models[0])
    }

    fn ask(&self, model: &ModelConfig, prompt: String, task: Task, context: &str) -> Result<Vec<String>, AugmentError> {
        let text = self.client.complete(&model.request(prompt, task))?;
        let items = llm::split_items(&text);
        if items.is_empty() {
            return Err(AugmentError::EmptyResponse { context: context.into() });
        }
        Ok(items)
    }

    fn term_clause(&self, term: Option<&str>) -> Result<String, AugmentError> {
        term.map(|t| self.templates.term.render(&[("term", t)]))
            .transpose()
            .map(Option::unwrap_or_default)
    }

    /// `scenario_multiplier` scenarios per term (or for the bare domain when
    /// there are no terms).
    pub fn generate_scenarios(&self) -> Result<Vec<Scenario>, AugmentError> {
        let plan = self.plan;
        let terms: Vec<Option<&str>> = if plan.terms.is_empty() {
            vec![None]
        } else {
            plan.terms.iter().map(|t| Some(t.as_str())).collect()
        };
        let per_term: Vec<Vec<Scenario>> = self.pool.install(|| {
            terms
                .par_iter()
                .enumerate()
                .map(|(ti, term)| {
                    let model = &plan.models[ti % plan.models.len()];
                    let count = plan.scenario_multiplier.to_string();
                    let prompt = self.templates.scenarios.render(&[
                        ("domain_seed", &plan.domain_seed),
                        ("count", &count),
                        ("term_clause", &self.term_clause(*term)?),
                    ])?;
                    let context = format!("scenarios for {}", term.unwrap_or("domain"));
                    let task = Task::Scenarios {
                        count: plan.scenario_multiplier,
                        term: term.map(str::to_owned),
                    };
                    let items = self.ask(model, prompt.clone(), task, &context)?;
                    if items.len() < plan.scenario_multiplier {
                        return Err(AugmentError::ShortResponse {
                            context,
                            wanted: plan.scenario_multiplier,
                            got: items.len(),
                        });
                    }
                    Ok(items
                        .into_iter()
                        .take(plan.scenario_multiplier)
                        .enumerate()
                        .map(|(k, text)| Scenario {
                            id: format!("sc{:04}", ti * plan.scenario_multiplier + k),
                            text,
                            term: term.map(str::to_owned),
                            model: model.id.clone(),
                            prompt: prompt.clone(),
                        })
                        .collect())
                })
                .collect::<Result<_, AugmentError>>()
        })?;
        Ok(per_term.into_iter().flatten().collect())
    }

    /// Up to `sentences_per_prompt` valid sentences for one scenario in one
    /// prompt language from one model.
    pub fn generate_texts(&self, scenario: &Scenario, lang: &str, model: &ModelConfig) -> Result<Vec<Sentence>, AugmentError> {
        let plan = self.plan;
        let term = scenario.term.as_deref();
        let mut instruction = format!("Write in {}.", prompts::language_name(lang));
        if let (Some(t), true) = (term, lang != plan.target_lang) {
            instruction.push(' ');
            instruction.push_str(&self.templates.keep_term.render(&[("term", t)])?);
        }
        let count = plan.sentences_per_prompt.to_string();
        let prompt = self.templates.generate.render(&[
            ("domain_seed", &plan.domain_seed),
            ("scenario", &scenario.text),
            ("term_clause", &self.term_clause(term)?),
            ("count", &count),
            ("language_instruction", &instruction),
        ])?;
        let context = format!("{} [{lang}, {}]", scenario.id, model.id);
        let task = Task::Generate {
            count: plan.sentences_per_prompt,
            term: scenario.term.clone(),
            lang: lang.into(),
        };
        let items = self.ask(model, prompt, task, &context)?;
        let sentences = items
            .into_iter()
            .take(plan.sentences_per_prompt)
            .enumerate()
            .filter_map(|(k, text)| {
                let id = format!("{}.{lang}.{}.{k}", scenario.id, model.id);
                Sentence::new(id, text, lang, &self.rules).ok().map(|s| {
                    s.with_provenance(Provenance {
                        model: Some(model.id.clone()),
                        step: "generate".into(),
                        scenario: Some(scenario.text.clone()),
                        prompt_lang: Some(lang.into()),
                        parent: None,
                    })
                })
            })
            .collect();
        let kept = validity_filter(sentences, self.constraints);
        if kept.is_empty() {
            return Err(AugmentError::AllFiltered { context });
        }
        Ok(kept)
    }

    fn translate_one(&self, s: &Sentence) -> Result<Sentence, AugmentError> {
        let target = &self.plan.target_lang;
        let model = self.model_for(s.provenance.model.as_deref());
        let keep = latin_term(s)
            .map(|t| self.templates.keep_term.render(&[("term", t)]))
            .transpose()?
            .unwrap_or_default();
        let prompt = self.templates.translate.render(&[
            ("text", &s.raw_text),
            ("target_language", prompts::language_name(target)),
            ("language_instruction", &keep),
        ])?;
        let task = Task::Translate {
            text: s.raw_text.clone(),
            target_lang: target.clone(),
        };
        let items = self.ask(model, prompt, task, &s.id)?;
        let text = items.into_iter().next().expect("non-empty");
        let out = Sentence::new(format!("{}.{target}", s.id), text, target.as_str(), &self.rules)
            .map_err(|_| AugmentError::EmptyResponse { context: s.id.clone() })?;
        Ok(out.with_provenance(Provenance {
            step: "translate".into(),
            parent: Some(s.id.clone()),
            ..s.provenance.clone()
        }))
    }

    /// One translation per input; failures become warnings.
    pub fn translate_back(&self, sentences: &[Sentence]) -> (Vec<Sentence>, Vec<Warning>) {
        let results: Vec<_> = self
            .pool
            .install(|| sentences.par_iter().map(|s| self.translate_one(s)).collect());
        let mut out = Vec::new();
        let mut warnings = Vec::new();
        for (s, r) in sentences.iter().zip(results) {
            match r {
                Ok(t) => out.push(t),
                Err(e) => warnings.push(Warning {
                    stage: "translate".into(),
                    sentence_id: Some(s.id.clone()),
                    message: e.to_string(),
                }),
            }
        }
        (out, warnings)
    }

    fn paraphrase_one(&self, s: &Sentence) -> Result<Vec<Sentence>, AugmentError> {
        let model = self.model_for(s.provenance.model.as_deref());
        let count = self.plan.sentences_per_prompt.to_string();
        let prompt = self.templates.paraphrase.render(&[
            ("domain_seed", &self.plan.domain_seed),
            ("text", &s.raw_text),
            ("count", &count),
        ])?;
        let task = Task::Paraphrase {
            count: self.plan.sentences_per_prompt,
            text: s.raw_text.clone(),
        };
        let items = self.ask(model, prompt, task, &s.id)?;
        let out = items
            .into_iter()
            .take(self.plan.sentences_per_prompt)
            .enumerate()
            .filter(|(_, t)| *t != s.raw_text)
            .filter_map(|(k, t)| {
                Sentence::new(format!("{}.p{k}", s.id), t, s.lang.as_str(), &self.rules)
                    .ok()
                    .map(|p| {
                        p.with_provenance(Provenance {
                            step: "paraphrase".into(),
                            parent: Some(s.id.clone()),
                            ..s.provenance.clone()
                        })
                    })
            })
            .collect();
        Ok(validity_filter(out, self.constraints))
    }

    /// Up to `sentences_per_prompt` paraphrases per input, excluding any
    /// identical to their source, ordered by input then fan-out index.
    pub fn paraphrase(&self, sentences: &[Sentence]) -> Result<Vec<Sentence>, AugmentError> {
        let per: Vec<Vec<Sentence>> = self.pool.install(|| {
            sentences
                .par_iter()
                .map(|s| self.paraphrase_one(s))
                .collect::<Result<_, _>>()
        })?;
        Ok(per.into_iter().flatten().collect())
    }

    /// The whole generation dataflow.
    pub fn run(&self) -> Result<GenerationOutput, AugmentError> {
        let plan = self.plan;
        let mut warnings = Vec::new();
        let scenarios = self.generate_scenarios()?;
        tracing::info!(count = scenarios.len(), "scenarios generated");

        let jobs: Vec<(&Scenario, &str, &ModelConfig)> = scenarios
            .iter()
            .flat_map(|sc| {
                plan.prompt_languages
                    .iter()
                    .flat_map(move |l| plan.models.iter().map(move |m| (sc, l.as_str(), m)))
            })
            .collect();
        let generated: Vec<Result<Vec<Sentence>, AugmentError>> = self.pool.install(|| {
            jobs.par_iter()
                .map(|(sc, lang, m)| self.generate_texts(sc, lang, m))
                .collect()
        });
        let mut texts = Vec::new();
        for r in generated {
            match r {
                Ok(v) => texts.extend(v),
                Err(e @ (AugmentError::AllFiltered { .. } | AugmentError::EmptyResponse { .. })) => {
                    warnings.push(Warning {
                        stage: "generate".into(),
                        sentence_id: None,
                        message: e.to_string(),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        tracing::info!(count = texts.len(), "texts generated");

        let foreign: Vec<Sentence> = texts.iter().filter(|s| s.lang != plan.target_lang).cloned().collect();
        let (translated, w) = self.translate_back(&foreign);
        warnings.extend(w);
        let mut translated = translated.into_iter().peekable();
        let mut base = Vec::with_capacity(texts.len());
        for s in texts {
            if s.lang == plan.target_lang {
                base.push(s);
            } else if translated.peek().is_some_and(|t| t.provenance.parent.as_deref() == Some(s.id.as_str())) {
                base.push(translated.next().expect("peeked"));
            }
        }
        let base = validity_filter(base, self.constraints);
        tracing::info!(count = base.len(), "target-language sentences");

        let paraphrases = self.paraphrase(&base)?;
        let mut merged = Vec::with_capacity(base.len() + paraphrases.len());
        let mut para = paraphrases.into_iter().peekable();
        for s in base {
            let id = s.id.clone();
            merged.push(s);
            while para.peek().is_some_and(|p| p.provenance.parent.as_deref() == Some(id.as_str())) {
                merged.push(para.next().expect("peeked"));
            }
        }
        let sentences = validity_filter(merged, self.constraints);
        tracing::info!(count = sentences.len(), "generation finished");
        Ok(GenerationOutput {
            scenarios,
            sentences,
            warnings,
        })
    }
}

/// The first ASCII word run in a non-Latin-script sentence, taken as the
/// English term the translation must preserve.
fn latin_term(s: &Sentence) -> Option<&str> {
    s.raw_text
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '\''))
        .find(|w| w.chars().any(|c| c.is_ascii_alphabetic()))
}
