//! Corpus selection and synthetic-data tooling for ASR domain adaptation.
//!
//! The crate is organised around the stages of a synthetic-data pipeline:
//!
//! * [`corpus`]: tokenization, corpus loading, domain-term extraction.
//! * [`textmetrics`]: MATTR, Distinct-n, mean perplexity, average term frequency.
//! * [`lm`]: the built-in add-k n-gram scorer and a remote scorer adapter.
//! * [`embed`] / [`kmeans`]: sentence embeddings and deterministic k-means.
//! * [`selector`]: tri-objective greedy selection and the multilevel (cluster) variant.
//! * [`augment`]: LLM generation orchestration, validity filters, phonetic respelling.
//! * [`eval`]: word alignment and WER / B-WER / U-WER.
//! * [`pipeline`]: configuration, TTS adapters, WAV accounting, manifests, CLI commands.
//!
//! Every external model sits behind a trait with a deterministic offline mock, so the
//! whole pipeline can run hermetically.

pub mod augment;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod http;
pub mod kmeans;
pub mod lm;
pub mod pipeline;
pub mod selector;
pub mod textmetrics;

pub use corpus::{Corpus, DomainTermSet, NormalizationRules, Provenance, Sentence};
pub use eval::{align, evaluate, Alignment, EvalReport};
pub use lm::{NGramLm, PerplexityScorer};
pub use selector::{greedy_select, muss_select, Budget, SelectionState, Weights};
