//! Stage orchestration behind the `asrdata` CLI.
//!
//! Every stage writes a new version directory, `<output_dir>/<stage>/vNNNN/`,
//! assembled in a hidden temporary directory and renamed into place only when
//! complete, so a failed run leaves nothing behind and earlier versions are
//! never touched. Each version holds its artifacts plus `run_log.json`.
//! Later stages read the newest version of the stage before them.

pub mod config;
pub mod manifest;
pub mod tts;
pub mod wav;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augment::{
    self, mix_respelled, AugmentError, CachedClient, GenerationPlan, Generator, HttpLlmClient, LlmClient, MockLlm,
    PromptTemplates, Warning,
};
use crate::corpus::{
    extract_domain_terms, load_corpus, load_reference_vocab, load_transcripts, Corpus, CorpusError, CorpusFormat,
    DomainTermSet, SentenceRecord,
};
use crate::embed::{self, EmbedError, EmbeddingBackend, EmbeddingCache, HttpEmbedder, MockEmbedder};
use crate::eval::{evaluate, EvalError, EvalOptions};
use crate::kmeans::{self, KMeansError};
use crate::lm::{LmError, NGramLm, PerplexityScorer, RemoteScorer};
use crate::selector::{self, GreedyOptions, SelectionError};
use crate::textmetrics::{MetricError, MetricsReport};

pub use config::{ConfigError, PipelineConfig};
pub use manifest::{DurationSource, ManifestEntry, SelectionRecord, Split};
pub use tts::{CommandTts, HttpTts, MockTts, TtsBackend, TtsError};
pub use wav::{read_wav_duration, WavError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no {what} found; run `asrdata {command}` first")]
    Missing { what: &'static str, command: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Artifact { path: String, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    KMeans(#[from] KMeansError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tts(#[from] TtsError),
}

impl PipelineError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

type Result<T, E = PipelineError> = std::result::Result<T, E>;

pub const RUN_LOG: &str = "run_log.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub path: String,
    pub sha256: String,
}

/// Provenance record for one stage version. Contains no timestamps, so
/// identical runs produce identical logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub tool_version: String,
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<InputRef>,
    pub outputs: Vec<String>,
    pub summary: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<Warning>,
}

/// A committed stage version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutput {
    pub stage: &'static str,
    pub version: String,
    pub dir: PathBuf,
}

impl StageOutput {
    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

/// A stage version under construction.
struct StageDir {
    stage: &'static str,
    root: PathBuf,
    tmp: PathBuf,
    inputs: Vec<InputRef>,
    outputs: Vec<String>,
    committed: bool,
}

impl StageDir {
    fn path(&self, name: &str) -> PathBuf {
        self.tmp.join(name)
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| PipelineError::io(&p, e))?;
        self.outputs.push(name.to_owned());
        Ok(())
    }

    fn commit(mut self, p: &Pipeline, summary: BTreeMap<String, serde_json::Value>, warnings: Vec<Warning>) -> Result<StageOutput> {
        let mut n = next_version(&self.root)?;
        loop {
            let version = format!("v{n:04}");
            let log = RunLog {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                command: self.stage.into(),
                version: version.clone(),
                config_hash: p.config_hash.clone(),
                seed: p.config.seed,
                inputs: self.inputs.clone(),
                outputs: self.outputs.clone(),
                summary: summary.clone(),
                warnings: warnings.clone(),
            };
            let log_path = self.path(RUN_LOG);
            fs::write(&log_path, serde_json::to_string_pretty(&log).expect("log serializes") + "\n")
                .map_err(|e| PipelineError::io(&log_path, e))?;
            let dest = self.root.join(&version);
            match fs::rename(&self.tmp, &dest) {
                Ok(()) => {
                    self.committed = true;
                    tracing::info!(stage = self.stage, %version, "stage committed");
                    return Ok(StageOutput {
                        stage: self.stage,
                        version,
                        dir: dest,
                    });
                }
                // Another process took this version number first.
                Err(_) if dest.exists() => n += 1,
                Err(e) => return Err(PipelineError::io(&dest, e)),
            }
        }
    }
}

impl Drop for StageDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

fn versions(root: &Path) -> Vec<(u32, PathBuf)> {
    let mut out: Vec<(u32, PathBuf)> = fs::read_dir(root)
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let n = name.strip_prefix('v')?.parse().ok()?;
            e.path().is_dir().then_some((n, e.path()))
        })
        .collect();
    out.sort();
    out
}

fn next_version(root: &Path) -> Result<u32> {
    Ok(versions(root).last().map_or(1, |(n, _)| n + 1))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn summary<const N: usize>(items: [(&str, serde_json::Value); N]) -> BTreeMap<String, serde_json::Value> {
    items.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

/// Seeds for independent random streams, derived from the master seed.
fn sub_seed(seed: u64, stream: &str) -> u64 {
    let d = Sha256::new().chain_update(seed.to_le_bytes()).chain_update(stream.as_bytes()).finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub struct Pipeline {
    config: PipelineConfig,
    base: PathBuf,
    config_hash: String,
}

impl Pipeline {
    /// Validates `config`; relative paths resolve against `base`.
    pub fn new(config: PipelineConfig, base: impl Into<PathBuf>) -> Result<Self> {
        let base = base.into();
        config.validate(&base)?;
        let config_hash = config.hash();
        Ok(Self {
            config,
            base,
            config_hash,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn output_dir(&self) -> PathBuf {
        self.config.resolve(&self.base, &self.config.paths.output_dir)
    }

    fn cache_dir(&self, sub: &str) -> PathBuf {
        self.config.resolve(&self.base, &self.config.paths.cache_dir).join(sub)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        self.config.resolve(&self.base, p)
    }

    /// Newest committed version of `stage`.
    pub fn latest(&self, stage: &str) -> Option<PathBuf> {
        versions(&self.output_dir().join(stage)).pop().map(|(_, p)| p)
    }

    fn require(&self, stage: &'static str, file: &str, what: &'static str) -> Result<PathBuf> {
        self.latest(stage)
            .map(|d| d.join(file))
            .filter(|p| p.exists())
            .ok_or(PipelineError::Missing { what, command: stage })
    }

    fn begin(&self, stage: &'static str) -> Result<StageDir> {
        let root = self.output_dir().join(stage);
        let tmp = root.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::SeqCst)
        ));
        fs::create_dir_all(&tmp).map_err(|e| PipelineError::io(&tmp, e))?;
        Ok(StageDir {
            stage,
            root,
            tmp,
            inputs: Vec::new(),
            outputs: Vec::new(),
            committed: false,
        })
    }

    /// Records an input in the run log. Paths inside the output directory are
    /// stored relative to it, so logs do not depend on where outputs live.
    fn input(&self, dir: &mut StageDir, path: &Path) -> Result<()> {
        let out = self.output_dir();
        let shown = path
            .strip_prefix(&out)
            .map(|p| p.display().to_string())
            .unwrap_or_else(|_| path.strip_prefix(&self.base).unwrap_or(path).display().to_string());
        dir.inputs.push(InputRef {
            path: shown,
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    fn templates(&self) -> Result<PromptTemplates> {
        Ok(match &self.config.paths.templates {
            Some(d) => PromptTemplates::load(&self.resolve(d))?,
            None => PromptTemplates::default(),
        })
    }

    fn llm(&self) -> Result<Box<dyn LlmClient>> {
        if self.config.mock_backends {
            return Ok(Box::new(MockLlm::new(sub_seed(self.config.seed, "llm"))));
        }
        let default = (!self.config.llm.endpoint.is_empty()).then(|| self.config.llm.clone());
        let http = HttpLlmClient::new(default, &self.config.generation.models)?;
        Ok(Box::new(CachedClient::new(http, Some(self.cache_dir("llm")))))
    }

    fn scorer(&self, fallback: &Corpus) -> Result<Box<dyn PerplexityScorer>> {
        let lm = &self.config.lm;
        if lm.kind == config::LmKind::Remote && !self.config.mock_backends {
            return Ok(Box::new(RemoteScorer::new(lm.remote.clone())?));
        }
        let trained = match &self.config.paths.lm_corpus {
            Some(p) => {
                let path = self.resolve(p);
                let c = load_corpus(&path, CorpusFormat::from_path(&path), &self.config.normalization)?;
                NGramLm::train(&c, lm.order, lm.smoothing)?
            }
            None => NGramLm::train(fallback, lm.order, lm.smoothing)?,
        };
        Ok(Box::new(trained))
    }

    fn embedder(&self) -> Result<Box<dyn EmbeddingBackend>> {
        let e = &self.config.embedding;
        if e.kind == config::EmbeddingKind::Http && !self.config.mock_backends {
            let b = HttpEmbedder::new(e.http.clone()).map_err(|source| EmbedError::Transport {
                failed_ids: Vec::new(),
                source,
            })?;
            return Ok(Box::new(b));
        }
        Ok(Box::new(MockEmbedder::new(e.dim, sub_seed(self.config.seed, "embed"))))
    }

    fn tts(&self) -> Result<Box<dyn TtsBackend>> {
        let t = &self.config.tts;
        if self.config.mock_backends || t.kind == config::TtsKind::Mock {
            return Ok(Box::new(MockTts {
                sample_rate: t.sample_rate,
                wpm: self.config.selection.wpm,
            }));
        }
        Ok(match t.kind {
            config::TtsKind::Http => Box::new(HttpTts::new(t.http.clone())?),
            _ => Box::new(t.command.clone()),
        })
    }

    fn load_terms(&self) -> Result<(DomainTermSet, PathBuf)> {
        let path = self.require("extract-terms", "terms.tsv", "domain term list")?;
        Ok((DomainTermSet::load(&path, &self.config.normalization)?, path))
    }

    /// Domain terms from transcripts minus the reference vocabulary, or the
    /// configured lexicon.
    pub fn extract_terms(&self) -> Result<StageOutput> {
        let mut dir = self.begin("extract-terms")?;
        let p = &self.config.paths;
        let rules = &self.config.normalization;
        let (terms, source) = match (&p.lexicon, &p.transcripts, &p.reference_vocab) {
            (Some(lex), _, _) => {
                let path = self.resolve(lex);
                self.input(&mut dir, &path)?;
                (DomainTermSet::load(&path, rules)?, "lexicon")
            }
            (None, Some(tr), Some(rv)) => {
                let (tr, rv) = (self.resolve(tr), self.resolve(rv));
                self.input(&mut dir, &tr)?;
                self.input(&mut dir, &rv)?;
                let transcripts = load_corpus(&tr, CorpusFormat::from_path(&tr), rules)?;
                let vocab = load_reference_vocab(&rv, rules)?;
                (extract_domain_terms(&transcripts, &vocab, self.config.terms.min_frequency), "extracted")
            }
            _ => {
                return Err(ConfigError {
                    field: "paths.lexicon".into(),
                    message: "set paths.lexicon, or both paths.transcripts and paths.reference_vocab".into(),
                }
                .into())
            }
        };
        dir.write("terms.tsv", terms.to_tsv())?;
        dir.commit(
            self,
            summary([("terms", terms.len().into()), ("source", source.into())]),
            Vec::new(),
        )
    }

    /// Scenarios, texts, translations, and paraphrases for the current terms.
    pub fn generate(&self) -> Result<StageOutput> {
        let (terms, terms_path) = self.load_terms()?;
        let mut dir = self.begin("generate")?;
        self.input(&mut dir, &terms_path)?;
        let g = &self.config.generation;
        let plan = GenerationPlan {
            domain_seed: g.domain_seed.clone(),
            terms: terms.iter().map(|(t, _)| t.to_owned()).collect(),
            scenario_multiplier: g.scenario_multiplier,
            prompt_languages: g.prompt_languages.clone(),
            sentences_per_prompt: g.sentences_per_prompt,
            models: g.models.clone(),
            target_lang: g.target_lang.clone(),
            max_concurrency: g.max_concurrency,
        };
        let templates = self.templates()?;
        let client = self.llm()?;
        let out = Generator::new(&plan, &templates, &self.config.constraints, client.as_ref())?.run()?;
        let corpus = Corpus::new("generated", out.sentences)?;
        dir.write("corpus.jsonl", corpus.to_jsonl())?;
        dir.write("scenarios.jsonl", manifest::to_jsonl(&out.scenarios))?;
        dir.commit(
            self,
            summary([
                ("scenarios", out.scenarios.len().into()),
                ("sentences", corpus.len().into()),
            ]),
            out.warnings,
        )
    }

    /// Multilevel selection over `pool`, or the newest generated corpus.
    pub fn filter(&self, pool: Option<&Path>) -> Result<StageOutput> {
        let (terms, terms_path) = self.load_terms()?;
        let pool_path = match pool {
            Some(p) => p.to_owned(),
            None => self.require("generate", "corpus.jsonl", "generated corpus")?,
        };
        let mut dir = self.begin("filter")?;
        self.input(&mut dir, &terms_path)?;
        self.input(&mut dir, &pool_path)?;
        let rules = &self.config.normalization;
        let pool = load_corpus(&pool_path, CorpusFormat::from_path(&pool_path), rules)?;
        if pool.is_empty() {
            return Err(PipelineError::Artifact {
                path: pool_path.display().to_string(),
                message: "candidate pool is empty".into(),
            });
        }
        let scorer = self.scorer(&pool)?;
        let features = selector::compute_static_features(&pool, scorer.as_ref(), &terms)?;
        let backend = self.embedder()?;
        let cache = EmbeddingCache::new(self.cache_dir("embeddings"));
        let matrix = embed::embed(&pool, backend.as_ref(), Some(&cache))?;
        let cl = &self.config.clustering;
        let k = kmeans::effective_k(cl.k, pool.len());
        let clustering = kmeans::kmeans(&matrix, k, sub_seed(self.config.seed, "kmeans"), cl.max_iters)?;
        let s = &self.config.selection;
        let opts = GreedyOptions {
            renormalize_every: s.renormalize_every,
            ..GreedyOptions::default()
        };
        let budget = self.config.budget()?;
        let outcome = selector::muss_select(
            &pool,
            &features,
            &clustering.assignments,
            s.per_cluster_take,
            s.cluster_pool_cap,
            &self.config.weights()?,
            &budget,
            &opts,
        )?;
        let records: Vec<SelectionRecord> = outcome
            .state
            .selected
            .iter()
            .map(|e| {
                let src = &pool.sentences[e.pool_index];
                SelectionRecord {
                    id: e.id.clone(),
                    text: src.raw_text.clone(),
                    lang: src.lang.clone(),
                    step: e.step,
                    score: e.score,
                    features: e.features,
                    cluster: clustering.assignments[e.pool_index],
                    duration: e.duration,
                    cumulative_duration: e.cumulative_duration,
                    provenance: src.provenance.clone(),
                }
            })
            .collect();
        let selected: Vec<SentenceRecord> = outcome
            .state
            .selected
            .iter()
            .map(|e| SentenceRecord::from(&pool.sentences[e.pool_index]))
            .collect();
        dir.write("selection.jsonl", manifest::to_jsonl(&records))?;
        dir.write("selected.jsonl", manifest::to_jsonl(&selected))?;
        dir.write(
            "clusters.json",
            serde_json::to_string_pretty(&outcome.ranking).expect("ranking serializes") + "\n",
        )?;
        dir.commit(
            self,
            summary([
                ("pool", pool.len().into()),
                ("clusters", clustering.k().into()),
                ("kmeans_iterations", clustering.iterations.into()),
                ("pooled", outcome.pooled.len().into()),
                ("selected", records.len().into()),
                ("total_duration", outcome.state.total_duration().into()),
                ("skipped", outcome.state.skipped.len().into()),
            ]),
            Vec::new(),
        )
    }

    /// Respells the selected sentences and mixes respelled and canonical TTS
    /// inputs into a manifest awaiting audio.
    pub fn respell(&self) -> Result<StageOutput> {
        let sel_path = self.require("filter", "selection.jsonl", "selection")?;
        let selected_path = self.require("filter", "selected.jsonl", "selection")?;
        let mut dir = self.begin("respell")?;
        self.input(&mut dir, &sel_path)?;
        let records: Vec<SelectionRecord> = manifest::read_jsonl(&sel_path)?;
        let corpus = load_corpus(&selected_path, CorpusFormat::Jsonl, &self.config.normalization)?;
        let templates = self.templates()?;
        let client = self.llm()?;
        let g = &self.config.generation;
        let model = self
            .config
            .respell
            .model
            .as_ref()
            .and_then(|id| g.models.iter().find(|m| &m.id == id))
            .unwrap_or(&g.models[0]);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(g.max_concurrency)
            .build()
            .map_err(|e| AugmentError::InvalidPlan(e.to_string()))?;
        let results: Vec<_> = pool.install(|| {
            corpus
                .sentences
                .par_iter()
                .map(|s| augment::respell(s, client.as_ref(), model, &templates))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let (pairs, warnings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let warnings: Vec<Warning> = warnings.into_iter().flatten().collect();
        let mixed = mix_respelled(&pairs, &corpus.sentences, self.config.respell.ratio, sub_seed(self.config.seed, "mix"))?;
        let splits = self.splits(mixed.len());
        let entries: Vec<ManifestEntry> = mixed
            .into_iter()
            .zip(&records)
            .zip(splits)
            .map(|((m, r), split)| ManifestEntry {
                id: m.sentence_id,
                audio: None,
                pending: true,
                speaker: None,
                tts_text: m.tts_text,
                asr_target: m.asr_target,
                duration: r.duration,
                duration_source: DurationSource::Estimated,
                respelled: m.respelled,
                split,
                error: None,
            })
            .collect();
        let respelled = entries.iter().filter(|e| e.respelled).count();
        dir.write("respelled.jsonl", manifest::to_jsonl(&pairs))?;
        dir.write("manifest.jsonl", manifest::to_jsonl(&entries))?;
        dir.commit(
            self,
            summary([
                ("entries", entries.len().into()),
                ("respelled", respelled.into()),
                ("fallbacks", warnings.len().into()),
            ]),
            warnings,
        )
    }

    fn splits(&self, n: usize) -> Vec<Option<Split>> {
        let Some(frac) = self.config.respell.validation_fraction else {
            return vec![None; n];
        };
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(self.config.seed, "split"));
        let mut out = vec![Some(Split::Train); n];
        for i in sample(&mut rng, n, augment::respell::respelled_count(n, frac)) {
            out[i] = Some(Split::Validation);
        }
        out
    }

    /// Synthesizes audio for the newest manifest and replaces estimated
    /// durations with ones measured from the WAV headers. Failed entries stay
    /// pending, carry the error, and keep their estimate.
    pub fn synthesize(&self) -> Result<StageOutput> {
        let man_path = self.require("respell", "manifest.jsonl", "training manifest")?;
        let mut dir = self.begin("synthesize")?;
        self.input(&mut dir, &man_path)?;
        let entries: Vec<ManifestEntry> = manifest::read_jsonl(&man_path)?;
        let audio_dir = dir.path("audio");
        fs::create_dir_all(&audio_dir).map_err(|e| PipelineError::io(&audio_dir, e))?;
        let tts = self.tts()?;
        let speakers = tts::draw_speakers(&self.config.tts.speakers, entries.len(), sub_seed(self.config.seed, "speaker"));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.tts.max_concurrency)
            .build()
            .map_err(|e| AugmentError::InvalidPlan(e.to_string()))?;
        let results: Vec<Result<f64, String>> = pool.install(|| {
            entries
                .par_iter()
                .zip(&speakers)
                .enumerate()
                .map(|(i, (e, spk))| {
                    let out = audio_dir.join(format!("{i:06}.wav"));
                    tts.synthesize(&e.tts_text, spk, &out).map_err(|e| e.to_string())?;
                    read_wav_duration(&out).map_err(|e| e.to_string())
                })
                .collect()
        });
        let mut warnings = Vec::new();
        let synthesized: Vec<ManifestEntry> = entries
            .into_iter()
            .zip(speakers)
            .zip(results)
            .enumerate()
            .map(|(i, ((e, speaker), r))| match r {
                Ok(seconds) => ManifestEntry {
                    audio: Some(format!("audio/{i:06}.wav")),
                    pending: false,
                    speaker: Some(speaker),
                    duration: seconds,
                    duration_source: DurationSource::Measured,
                    error: None,
                    ..e
                },
                Err(msg) => {
                    warnings.push(Warning {
                        stage: "synthesize".into(),
                        sentence_id: Some(e.id.clone()),
                        message: msg.clone(),
                    });
                    ManifestEntry {
                        speaker: Some(speaker),
                        error: Some(msg),
                        ..e
                    }
                }
            })
            .collect();
        let total = manifest::total_duration(&synthesized);
        dir.outputs.push("audio/".into());
        dir.write("manifest.jsonl", manifest::to_jsonl(&synthesized))?;
        dir.commit(
            self,
            summary([
                ("entries", synthesized.len().into()),
                ("failed", warnings.len().into()),
                ("total_duration", total.into()),
            ]),
            warnings,
        )
    }

    /// Text metrics for `corpus`, or for the newest selection.
    pub fn metrics(&self, corpus: Option<&Path>) -> Result<StageOutput> {
        let (terms, terms_path) = self.load_terms()?;
        let path = match corpus {
            Some(p) => p.to_owned(),
            None => self.require("filter", "selected.jsonl", "selection")?,
        };
        let mut dir = self.begin("metrics")?;
        self.input(&mut dir, &terms_path)?;
        self.input(&mut dir, &path)?;
        let c = load_corpus(&path, CorpusFormat::from_path(&path), &self.config.normalization)?;
        let scorer = self.scorer(&c)?;
        let report = MetricsReport::compute(&c, &terms, scorer.as_ref(), self.config.metrics.mattr_window)?;
        dir.write("metrics.json", report.to_json() + "\n")?;
        dir.commit(self, summary([("sentences", c.len().into())]), Vec::new())
    }

    /// WER, B-WER and U-WER of `hypothesis` against `reference`.
    pub fn evaluate(&self, reference: &Path, hypothesis: &Path, opts: &EvalOptions, alignments: bool) -> Result<StageOutput> {
        let (terms, terms_path) = self.load_terms()?;
        let mut dir = self.begin("evaluate")?;
        self.input(&mut dir, &terms_path)?;
        self.input(&mut dir, reference)?;
        self.input(&mut dir, hypothesis)?;
        let rules = &self.config.normalization;
        let r = load_transcripts(reference, CorpusFormat::from_path(reference), rules)?;
        let h = load_transcripts(hypothesis, CorpusFormat::from_path(hypothesis), rules)?;
        let report = evaluate(&r, &h, &terms, opts)?;
        dir.write("report.json", report.to_json() + "\n")?;
        if alignments {
            dir.write("alignments.tsv", report.alignments_tsv(&terms))?;
        }
        dir.commit(
            self,
            summary([("utterances", r.len().into()), ("wer", report.wer.into())]),
            Vec::new(),
        )
    }

    /// Every stage from term extraction through synthesis and metrics.
    pub fn run(&self) -> Result<Vec<StageOutput>> {
        Ok(vec![
            self.extract_terms()?,
            self.generate()?,
            self.filter(None)?,
            self.respell()?,
            self.synthesize()?,
            self.metrics(None)?,
        ])
    }
}
