//! Pipeline configuration: one TOML file plus environment overrides for
//! endpoints and API keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::tts::{default_speakers, CommandTts};
use crate::augment::{default_constraints, LengthConstraint, ModelConfig};
use crate::corpus::{NormalizationRules, DEFAULT_MIN_TERM_FREQUENCY};
use crate::embed::HttpEmbedderConfig;
use crate::http::HttpConfig;
use crate::kmeans::{DEFAULT_K, DEFAULT_MAX_ITERS};
use crate::lm::{RemoteScorerConfig, DEFAULT_ORDER, DEFAULT_SMOOTHING};
use crate::selector::{Budget, DurationModel, Weights, DEFAULT_CLUSTER_POOL_CAP, DEFAULT_PER_CLUSTER_TAKE, DEFAULT_WPM};
use crate::textmetrics::DEFAULT_MATTR_WINDOW;

#[derive(Debug, Error)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// In-domain transcripts used for term extraction.
    pub transcripts: Option<PathBuf>,
    /// Vocabulary of a standard ASR training corpus, one word per line.
    pub reference_vocab: Option<PathBuf>,
    /// Explicit term list; used instead of extraction when set.
    pub lexicon: Option<PathBuf>,
    /// Training text for the built-in n-gram scorer. Defaults to the scored corpus itself.
    pub lm_corpus: Option<PathBuf>,
    /// Prompt-template overrides.
    pub templates: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            transcripts: None,
            reference_vocab: None,
            lexicon: None,
            lm_corpus: None,
            templates: None,
            cache_dir: "cache".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TermsConfig {
    pub min_frequency: usize,
}

impl Default for TermsConfig {
    fn default() -> Self {
        Self {
            min_frequency: DEFAULT_MIN_TERM_FREQUENCY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub domain_seed: String,
    pub scenario_multiplier: usize,
    pub prompt_languages: Vec<String>,
    pub sentences_per_prompt: usize,
    pub target_lang: String,
    pub max_concurrency: usize,
    pub models: Vec<ModelConfig>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let plan = crate::augment::GenerationPlan::default();
        Self {
            domain_seed: plan.domain_seed,
            scenario_multiplier: plan.scenario_multiplier,
            prompt_languages: plan.prompt_languages,
            sentences_per_prompt: plan.sentences_per_prompt,
            target_lang: plan.target_lang,
            max_concurrency: plan.max_concurrency,
            models: plan.models,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LmKind {
    #[default]
    Ngram,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub kind: LmKind,
    pub order: usize,
    pub smoothing: f64,
    pub remote: RemoteScorerConfig,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            kind: LmKind::Ngram,
            order: DEFAULT_ORDER,
            smoothing: DEFAULT_SMOOTHING,
            remote: RemoteScorerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    /// Dimension of the offline hashing embedder.
    pub dim: usize,
    pub http: HttpEmbedderConfig,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: EmbeddingKind::Mock,
            dim: 64,
            http: HttpEmbedderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k: usize,
    pub max_iters: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// `alpha:beta:gamma`, normalized to sum to 1.
    pub weights: String,
    /// At most one of the two budgets may be set; neither means
    /// [`DEFAULT_BUDGET_SECONDS`].
    pub budget_seconds: Option<f64>,
    pub budget_count: Option<usize>,
    pub wpm: f64,
    pub per_cluster_take: usize,
    pub cluster_pool_cap: usize,
    pub renormalize_every: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            weights: "6:3:1".into(),
            budget_seconds: None,
            budget_count: None,
            wpm: DEFAULT_WPM,
            per_cluster_take: DEFAULT_PER_CLUSTER_TAKE,
            cluster_pool_cap: DEFAULT_CLUSTER_POOL_CAP,
            renormalize_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RespellConfig {
    pub ratio: f64,
    /// Model id from `generation.models`; the first model when unset.
    pub model: Option<String>,
    /// Fraction of entries tagged `validation` in the manifest; no split field when unset.
    pub validation_fraction: Option<f64>,
}

impl Default for RespellConfig {
    fn default() -> Self {
        Self {
            ratio: 0.6,
            model: None,
            validation_fraction: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TtsKind {
    #[default]
    Mock,
    Http,
    Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtsConfig {
    pub kind: TtsKind,
    pub speakers: Vec<String>,
    pub http: HttpConfig,
    pub command: CommandTts,
    /// Sample rate of the mock synthesizer.
    pub sample_rate: u32,
    pub max_concurrency: usize,
}

impl Default for TtsConfig {
    fn default() -> Self {
        Self {
            kind: TtsKind::Mock,
            speakers: default_speakers(),
            http: HttpConfig::default(),
            command: CommandTts::default(),
            sample_rate: 16_000,
            max_concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub mattr_window: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            mattr_window: DEFAULT_MATTR_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Replace every external backend with its offline mock.
    pub mock_backends: bool,
    pub paths: Paths,
    pub normalization: NormalizationRules,
    pub terms: TermsConfig,
    pub generation: GenerationConfig,
    /// Default chat endpoint for models without their own.
    pub llm: HttpConfig,
    pub constraints: Vec<LengthConstraint>,
    pub lm: LmConfig,
    pub embedding: EmbeddingConfig,
    pub clustering: ClusteringConfig,
    pub selection: SelectionConfig,
    pub respell: RespellConfig,
    pub tts: TtsConfig,
    pub metrics: MetricsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mock_backends: false,
            paths: Paths::default(),
            normalization: NormalizationRules::default(),
            terms: TermsConfig::default(),
            generation: GenerationConfig::default(),
            llm: HttpConfig::default(),
            constraints: default_constraints(),
            lm: LmConfig::default(),
            embedding: EmbeddingConfig::default(),
            clustering: ClusteringConfig::default(),
            selection: SelectionConfig::default(),
            respell: RespellConfig::default(),
            tts: TtsConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

/// Environment variables consulted by [`PipelineConfig::apply_env`].
pub const DEFAULT_BUDGET_SECONDS: f64 = 3600.0;

pub const ENV_OVERRIDES: &[&str] = &[
    "ASRDATA_LLM_ENDPOINT",
    "ASRDATA_LLM_API_KEY",
    "ASRDATA_LM_ENDPOINT",
    "ASRDATA_LM_API_KEY",
    "ASRDATA_EMBED_ENDPOINT",
    "ASRDATA_EMBED_API_KEY",
    "ASRDATA_TTS_ENDPOINT",
    "ASRDATA_TTS_API_KEY",
];

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("byte {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<document>".into());
            field_err(&field, e.message().to_owned())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| field_err("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `ASRDATA_*` endpoint and key overrides read through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        let slots: [(&str, &mut HttpConfig); 4] = [
            ("LLM", &mut self.llm),
            ("LM", &mut self.lm.remote.http),
            ("EMBED", &mut self.embedding.http.http),
            ("TTS", &mut self.tts.http),
        ];
        for (name, http) in slots {
            if let Some(v) = get(&format!("ASRDATA_{name}_ENDPOINT")) {
                http.endpoint = v;
            }
            if let Some(v) = get(&format!("ASRDATA_{name}_API_KEY")) {
                http.api_key = Some(v);
            }
        }
    }

    /// SHA-256 of the canonical JSON form. API keys are excluded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn weights(&self) -> Result<Weights, ConfigError> {
        self.selection
            .weights
            .parse()
            .map_err(|e: crate::selector::SelectionError| field_err("selection.weights", e.to_string()))
    }

    /// Seconds budget, count budget, or [`DEFAULT_BUDGET_SECONDS`] when neither is set.
    pub fn budget(&self) -> Result<Budget, ConfigError> {
        let s = &self.selection;
        let b = match (s.budget_seconds, s.budget_count) {
            (Some(x), None) if x > 0.0 && x.is_finite() => Budget::seconds(x),
            (None, Some(n)) if n > 0 => Budget::count(n),
            (Some(_), Some(_)) => {
                return Err(field_err("selection.budget_seconds", "set only one of budget_seconds and budget_count"))
            }
            (None, None) => Budget::seconds(DEFAULT_BUDGET_SECONDS),
            (Some(_), None) => return Err(field_err("selection.budget_seconds", "must be positive and finite")),
            (None, Some(_)) => return Err(field_err("selection.budget_count", "must be positive")),
        };
        Ok(b.with_duration_model(DurationModel::HeuristicWpm { wpm: s.wpm }))
    }

    /// Resolves a configured path against the config file's directory.
    pub fn resolve(&self, base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            base.join(p)
        }
    }

    /// Checks numeric ranges, required endpoints, and that input paths exist.
    pub fn validate(&self, base: &Path) -> Result<(), ConfigError> {
        let check = |ok: bool, field: &str, msg: &str| if ok { Ok(()) } else { Err(field_err(field, msg)) };
        self.weights()?;
        self.budget()?;
        let s = &self.selection;
        check(s.wpm > 0.0 && s.wpm.is_finite(), "selection.wpm", "must be positive")?;
        check(s.per_cluster_take >= 1, "selection.per_cluster_take", "must be at least 1")?;
        check(s.cluster_pool_cap >= 1, "selection.cluster_pool_cap", "must be at least 1")?;
        check(s.renormalize_every >= 1, "selection.renormalize_every", "must be at least 1")?;
        check(self.clustering.k >= 1, "clustering.k", "must be at least 1")?;
        check(self.clustering.max_iters >= 1, "clustering.max_iters", "must be at least 1")?;
        let g = &self.generation;
        check(g.scenario_multiplier >= 1, "generation.scenario_multiplier", "must be at least 1")?;
        check(g.sentences_per_prompt >= 1, "generation.sentences_per_prompt", "must be at least 1")?;
        check(!g.models.is_empty(), "generation.models", "at least one model is required")?;
        check(!g.prompt_languages.is_empty(), "generation.prompt_languages", "at least one language is required")?;
        check(g.max_concurrency >= 1, "generation.max_concurrency", "must be at least 1")?;
        for (i, m) in g.models.iter().enumerate() {
            check(
                m.temperature >= 0.0 && (0.0..=1.0).contains(&m.top_p) && m.top_p > 0.0,
                &format!("generation.models[{i}]"),
                "temperature must be >= 0 and top_p in (0, 1]",
            )?;
        }
        for (i, c) in self.constraints.iter().enumerate() {
            check(c.min_words <= c.max_words, &format!("constraints[{i}]"), "min_words > max_words")?;
        }
        for lang in g.prompt_languages.iter().chain([&g.target_lang]) {
            check(
                self.constraints.iter().any(|c| &c.lang == lang),
                "constraints",
                &format!("no length constraint for language {lang:?}"),
            )?;
        }
        check(self.lm.order >= 1, "lm.order", "must be at least 1")?;
        check(self.lm.smoothing > 0.0 && self.lm.smoothing.is_finite(), "lm.smoothing", "must be positive")?;
        check(self.embedding.dim >= 1, "embedding.dim", "must be at least 1")?;
        check((0.0..=1.0).contains(&self.respell.ratio), "respell.ratio", "must be in [0, 1]")?;
        if let Some(v) = self.respell.validation_fraction {
            check((0.0..1.0).contains(&v), "respell.validation_fraction", "must be in [0, 1)")?;
        }
        if let Some(m) = &self.respell.model {
            check(g.models.iter().any(|x| &x.id == m), "respell.model", "not one of generation.models")?;
        }
        check(!self.tts.speakers.is_empty(), "tts.speakers", "at least one speaker is required")?;
        check(self.tts.sample_rate > 0, "tts.sample_rate", "must be positive")?;
        check(self.tts.max_concurrency >= 1, "tts.max_concurrency", "must be at least 1")?;
        check(self.metrics.mattr_window >= 1, "metrics.mattr_window", "must be at least 1")?;
        if !self.mock_backends {
            if self.lm.kind == LmKind::Remote {
                check(!self.lm.remote.http.endpoint.is_empty(), "lm.remote.endpoint", "required for the remote scorer")?;
            }
            if self.embedding.kind == EmbeddingKind::Http {
                check(!self.embedding.http.http.endpoint.is_empty(), "embedding.http.endpoint", "required for HTTP embeddings")?;
            }
            if self.tts.kind == TtsKind::Http {
                check(!self.tts.http.endpoint.is_empty(), "tts.http.endpoint", "required for HTTP synthesis")?;
            }
        }
        let p = &self.paths;
        for (field, path) in [
            ("paths.transcripts", &p.transcripts),
            ("paths.reference_vocab", &p.reference_vocab),
            ("paths.lexicon", &p.lexicon),
            ("paths.lm_corpus", &p.lm_corpus),
            ("paths.templates", &p.templates),
        ] {
            if let Some(path) = path {
                let full = self.resolve(base, path);
                check(full.exists(), field, &format!("{} does not exist", full.display()))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = PipelineConfig::default();
        c.validate(Path::new(".")).unwrap();
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = PipelineConfig::default();
        c.selection.weights = "6:x:1".into();
        assert_eq!(c.validate(Path::new(".")).unwrap_err().field, "selection.weights");
        let mut c = PipelineConfig::default();
        c.respell.ratio = 1.5;
        assert_eq!(c.validate(Path::new(".")).unwrap_err().field, "respell.ratio");
        let mut c = PipelineConfig::default();
        c.paths.lexicon = Some("/nonexistent/terms.tsv".into());
        assert_eq!(c.validate(Path::new(".")).unwrap_err().field, "paths.lexicon");
        assert!(PipelineConfig::from_toml("[selection]\nweigths = \"1:1:1\"").is_err());
    }

    #[test]
    fn hash_tracks_effective_parameters_not_keys() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.apply_env(|k| (k == "ASRDATA_LLM_API_KEY").then(|| "secret".into()));
        assert_eq!(a.hash(), b.hash());
        b.apply_env(|k| (k == "ASRDATA_LLM_ENDPOINT").then(|| "http://x".into()));
        assert_ne!(a.hash(), b.hash());
        assert_eq!(b.llm.endpoint, "http://x");
        let mut c = a.clone();
        c.selection.per_cluster_take += 1;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn budget_kinds() {
        use crate::selector::BudgetLimit;
        let mut c = PipelineConfig::default();
        assert_eq!(c.budget().unwrap().limit, BudgetLimit::Seconds(DEFAULT_BUDGET_SECONDS));
        c.selection.budget_count = Some(10);
        assert_eq!(c.budget().unwrap().limit, BudgetLimit::Count(10));
        c.selection.budget_seconds = Some(60.0);
        assert!(c.budget().is_err());
    }

    #[test]
    fn count_budget_survives_toml_round_trip() {
        let mut c = PipelineConfig::default();
        c.selection.budget_count = Some(10);
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }
}
