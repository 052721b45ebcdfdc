//! Command-line front end: flag parsing and config merging only; the
//! stages live in `repset_core::cli`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use repset_core::cli::{self, PipelineConfig};
use repset_core::transpile::BackendKind;

#[derive(Parser)]
#[command(
    name = "repset",
    about = "Reduce a C function corpus to a representative subset for C-to-Rust transpilation benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Directory tree of preprocessed .c files, one program per
    /// subdirectory.
    #[arg(long, global = true)]
    corpus_dir: Option<PathBuf>,
    /// Directory for all stage outputs.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    /// JSON pipeline config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Concurrent samples during transpilation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for subsampling and selection provenance.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Translation backend.
    #[arg(long, global = true, value_parser = ["mock", "http"])]
    backend: Option<String>,
    /// Generate endpoint URL (http backend).
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Model name sent with each request (http backend).
    #[arg(long, global = true)]
    model: Option<String>,
    /// Compilation error fixing attempt limit.
    #[arg(long, global = true)]
    max_attempts: Option<u32>,
    /// JSON array of scripted responses (mock backend).
    #[arg(long, global = true)]
    mock_script: Option<PathBuf>,
    /// Partitions per metric dimension for select.
    #[arg(long, global = true)]
    partitions: Option<u32>,
    /// Sampling ratio per bin for select.
    #[arg(long, global = true)]
    ratio: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Split preprocessed C files into single-function samples and write
    /// the corpus manifest.
    Segment {
        /// Keep only a random fraction of the functions (microbenchmark
        /// draw).
        #[arg(long)]
        sample_fraction: Option<f64>,
    },
    /// Translate every sample through the backend's compile-fix loop.
    Transpile,
    /// Compute the four complexity metrics per sample.
    Metrics,
    /// Pick the representative subset at the configured (n, r).
    Select,
    /// Grid-search (n, r) against recorded fix attempts.
    Tune,
    /// Score the stored selection against recorded fix attempts.
    Evaluate,
}

fn merged_config(overrides: &Overrides) -> Result<(PipelineConfig, u64)> {
    let mut config = match &overrides.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &overrides.corpus_dir {
        config.corpus_dir = dir.clone();
    }
    if let Some(dir) = &overrides.work_dir {
        config.work_dir = dir.clone();
    }
    if let Some(workers) = overrides.workers {
        config.worker_limit = workers.max(1);
    }
    if let Some(kind) = &overrides.backend {
        config.backend.kind = match kind.as_str() {
            "http" => BackendKind::Http,
            _ => BackendKind::Mock,
        };
    }
    if let Some(endpoint) = &overrides.endpoint {
        config.backend.endpoint_url = Some(endpoint.clone());
    }
    if let Some(model) = &overrides.model {
        config.backend.model_name = Some(model.clone());
    }
    if let Some(max) = overrides.max_attempts {
        config.backend.max_fix_attempts = max;
    }
    if let Some(script) = &overrides.mock_script {
        config.backend.mock_script = Some(script.clone());
    }
    if let Some(n) = overrides.partitions {
        config.selection.n = n;
    }
    if let Some(r) = overrides.ratio {
        config.selection.r = r;
    }
    let seed = overrides.seed.unwrap_or(0);
    config.selection.seed = seed;
    Ok((config, seed))
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let (config, seed) = merged_config(&cli.overrides)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_limit)
        .build_global()
        .ok();
    match cli.command {
        Command::Segment { sample_fraction } => {
            cli::cmd_segment(&config, sample_fraction, seed)?;
        }
        Command::Transpile => {
            cli::cmd_transpile(&config)?;
        }
        Command::Metrics => {
            cli::cmd_metrics(&config)?;
        }
        Command::Select => {
            cli::cmd_select(&config)?;
        }
        Command::Tune => {
            cli::cmd_tune(&config)?;
        }
        Command::Evaluate => {
            cli::cmd_evaluate(&config)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
