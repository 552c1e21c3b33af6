use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use asrdata::augment::PromptTemplates;
use asrdata::eval::{EvalOptions, InsertionAttribution};
use asrdata::pipeline::{Pipeline, PipelineConfig, StageOutput};

#[derive(Parser)]
#[command(name = "asrdata", version, about = "Build and select synthetic ASR adaptation corpora")]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, env = "ASRDATA_CONFIG", default_value = "asrdata.toml")]
    config: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use offline mock LLM, embedding, and TTS backends.
    #[arg(long, global = true)]
    mock_backends: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a default configuration file and prompt templates.
    Init {
        /// Directory for the editable prompt templates.
        #[arg(long, default_value = "templates")]
        templates: PathBuf,
    },
    /// Extract domain terms (or load the configured lexicon).
    ExtractTerms,
    /// Generate candidate sentences with the configured LLMs.
    Generate,
    /// Select a budgeted subset of the generated pool.
    Filter {
        /// Candidate pool to select from instead of the newest generated corpus.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Respell selected sentences and mix them into a training manifest.
    Respell,
    /// Synthesize audio for the newest manifest.
    Synthesize,
    /// Compute text metrics for a corpus.
    Metrics {
        /// Corpus to measure instead of the newest selection.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Score ASR hypotheses against reference transcripts.
    Evaluate {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        /// Also write per-utterance alignments as TSV.
        #[arg(long)]
        alignments: bool,
        /// Charge every insertion to the unbiased class instead of to the
        /// class of the inserted word.
        #[arg(long)]
        unbiased_insertions: bool,
    },
    /// Run every stage from term extraction to metrics.
    Run,
}

fn load(cli: &Cli) -> anyhow::Result<Pipeline> {
    let mut config = PipelineConfig::load(&cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    config.apply_env(|k| std::env::var(k).ok());
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.mock_backends |= cli.mock_backends;
    let base = cli.config.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    Ok(Pipeline::new(config, base)?)
}

fn report(out: &StageOutput) {
    println!("{} {} {}", out.stage, out.version, out.dir.display());
}

fn init(cli: &Cli, templates: &Path) -> anyhow::Result<()> {
    if cli.config.exists() {
        anyhow::bail!("{} already exists", cli.config.display());
    }
    let mut config = PipelineConfig::default();
    config.paths.templates = Some(templates.to_owned());
    std::fs::write(&cli.config, config.to_toml()).with_context(|| cli.config.display().to_string())?;
    let base = cli.config.parent().unwrap_or(Path::new("."));
    PromptTemplates::default().write_to(&base.join(templates))?;
    println!("wrote {} and {}/", cli.config.display(), templates.display());
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Cmd::Init { templates } = &cli.command {
        return init(cli, templates);
    }
    let p = load(cli)?;
    tracing::info!(config_hash = p.config_hash(), seed = p.config().seed, "configuration loaded");
    match &cli.command {
        Cmd::Init { .. } => unreachable!(),
        Cmd::ExtractTerms => report(&p.extract_terms()?),
        Cmd::Generate => report(&p.generate()?),
        Cmd::Filter { pool } => report(&p.filter(pool.as_deref())?),
        Cmd::Respell => report(&p.respell()?),
        Cmd::Synthesize => report(&p.synthesize()?),
        Cmd::Metrics { corpus } => report(&p.metrics(corpus.as_deref())?),
        Cmd::Evaluate {
            reference,
            hypothesis,
            alignments,
            unbiased_insertions,
        } => {
            let opts = EvalOptions {
                insertions: if *unbiased_insertions {
                    InsertionAttribution::Unbiased
                } else {
                    InsertionAttribution::HypothesisWord
                },
            };
            report(&p.evaluate(reference, hypothesis, &opts, *alignments)?)
        }
        Cmd::Run => p.run()?.iter().for_each(report),
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
