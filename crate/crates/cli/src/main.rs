mod config;
mod manifest;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use biomarker_lab::eval::EvalError;
use biomarker_lab::features::FeatureIoError;
use biomarker_lab::ingest::IngestError;
use biomarker_lab::labeling::LabelError;
use biomarker_lab::stats::{Correction, StatsError};
use biomarker_lab::synthcohort::{CohortConfig, SynthError};
use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::manifest::RunManifest;
use crate::stages::Ctx;

/// A problem with the inputs or configuration rather than with the tool.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser)]
#[command(name = "biomarker-lab", version, about = "Passive-sensing loneliness biomarker pipeline")]
struct Cli {
    /// Run configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, env = "BIOMARKER_LAB_OUT", default_value = "out")]
    out_dir: PathBuf,
    /// Multiple-comparison correction for the group comparison.
    #[arg(long, global = true)]
    correction: Option<Correction>,
    /// Write every fold's model-ready matrices under preprocessed/.
    #[arg(long, global = true)]
    dump_preprocessed: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw sensor files and write canonical copies.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Daily and participant-level features from ingested data.
    Extract,
    /// Score the UCLA questionnaire into loneliness categories.
    Label {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compare the two configured groups feature by feature.
    Stats,
    /// Fit every model on all labeled participants.
    Train,
    /// Leave-one-participant-out benchmark.
    Evaluate,
    /// SHAP feature rankings of the tree models.
    Explain,
    /// Generate a synthetic cohort with planted differences.
    Synth {
        /// Cohort configuration (JSON); defaults to the run config's `synth`.
        #[arg(long)]
        cohort: Option<PathBuf>,
    },
    /// Render all tables into report.md.
    Report,
    /// Run every stage from raw inputs to the report.
    Pipeline {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load_cohort(path: &Path) -> anyhow::Result<CohortConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Invalid(format!("cannot read cohort config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Invalid(format!("bad cohort config {}: {e}", path.display())).into())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Invalid("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot size the worker pool")?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(c) = cli.correction {
        cfg.stats.correction = c;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("cannot create {}", cli.out_dir.display()))?;
    let mut cohort = None;
    if let Command::Synth { cohort: path } = &cli.command {
        let mut c = match path {
            Some(p) => load_cohort(p)?,
            None => cfg.synth.clone(),
        };
        if let Some(seed) = cli.seed {
            c.seed = seed;
        }
        cfg.synth = c.clone();
        cohort = Some(c);
    }
    let manifest = RunManifest::open(&cli.out_dir, &cfg);
    let mut ctx = Ctx { cfg, out: cli.out_dir, dump_preprocessed: cli.dump_preprocessed, manifest };
    match cli.command {
        Command::Ingest { input } => {
            let input = ctx.cfg.input_dir(input.as_deref())?;
            ctx.ingest(&input)
        }
        Command::Extract => ctx.extract(),
        Command::Label { input } => {
            let input = ctx.cfg.input_dir(input.as_deref())?;
            ctx.label(&input)
        }
        Command::Stats => ctx.stats(),
        Command::Train => ctx.train(),
        Command::Evaluate => ctx.evaluate(),
        Command::Explain => ctx.explain(),
        Command::Synth { .. } => ctx.synth(&cohort.expect("set above")),
        Command::Report => ctx.report(),
        Command::Pipeline { input } => {
            let input = ctx.cfg.input_dir(input.as_deref())?;
            ctx.pipeline(&input)
        }
    }
}

/// 2 for bad inputs or configuration, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let invalid = err.chain().any(|e| {
        e.is::<Invalid>()
            || e.is::<StatsError>()
            || e.is::<LabelError>()
            || matches!(e.downcast_ref::<IngestError>(), Some(x) if !matches!(x, IngestError::Csv(_)))
            || matches!(
                e.downcast_ref::<EvalError>(),
                Some(
                    EvalError::TooFewParticipants { .. }
                        | EvalError::ClassTooSmall(_)
                        | EvalError::EmptyRoster
                        | EvalError::EmptyGrid(_)
                )
            )
            || matches!(e.downcast_ref::<SynthError>(), Some(SynthError::Config(_)))
            || matches!(e.downcast_ref::<FeatureIoError>(), Some(FeatureIoError::Header | FeatureIoError::Row { .. }))
    });
    if invalid {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
