//! `floodpulse` — subcommand front end for the flood-impact pipeline.
//!
//! Every subcommand reads an optional TOML config (`--config`), applies
//! flag overrides on top (flags win), and exits 0 on success, 2 on config
//! errors, 3 on data errors, and 4 when an analysis is degenerate. Errors
//! print one machine-parsable line to stderr: `error[<code>] <message>`.

use clap::{Args, Parser, Subcommand};
use floodpulse_core::features::ImputePolicy;
use floodpulse_core::pipeline::{
    run_analyze, run_features, run_full, run_labels, run_synth, run_validate, ClassChoice,
    MeasureChoice, Overrides, PipelineConfig, PipelineError, RunArtifacts,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "floodpulse",
    version,
    about = "Baseline-deviation features, impact labels, and daily random-forest reports \
             for community-scale disruption data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Run configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (overrides the config file).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Impact measures to analyze: claims, inundation, or both.
    #[arg(long, global = true, value_name = "WHICH")]
    measure: Option<MeasureChoice>,
    /// Class-count schemes to run: 2, 3, 4, or all.
    #[arg(long, global = true, value_name = "WHICH")]
    classes: Option<ClassChoice>,
    /// Enable per-day hyperparameter search.
    #[arg(long, global = true)]
    tune: bool,
    /// Rank-stability tolerance for persistence periods.
    #[arg(long = "persistence-k", global = true, value_name = "N")]
    persistence_k: Option<usize>,
    /// Missing-feature policy: median, zero, or drop.
    #[arg(long, global = true, value_name = "POLICY")]
    impute: Option<ImputePolicy>,
    /// Disable internal parallelism (bytes written are identical either way).
    #[arg(long, global = true)]
    serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and schema-check every configured input file.
    Validate,
    /// Emit the aggregated series and per-flood-day feature CSVs.
    Features,
    /// Emit label CSVs for the requested measures and class counts.
    Labels,
    /// Fit daily models and write rank/persistence/F1 reports.
    Analyze,
    /// Generate a synthetic raw fileset with planted ground truth.
    Synth,
    /// Synthesize (if `[synth]` is configured) or load real inputs, then analyze.
    Full,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            measure: self.measure,
            classes: self.classes,
            tune: self.tune,
            persistence_k: self.persistence_k,
            impute: self.impute,
            serial: self.serial,
        }
    }
}

fn load_config(flags: &Flags) -> Result<PipelineConfig, PipelineError> {
    let mut config = match &flags.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    flags.overrides().apply(&mut config);
    Ok(config)
}

fn report_artifacts(what: &str, artifacts: &RunArtifacts) {
    println!(
        "ok: {what}: {} files under {} (manifest {})",
        artifacts.written.len(),
        artifacts.out_dir.display(),
        artifacts.manifest.display()
    );
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let config = load_config(&cli.flags)?;
    match cli.command {
        Command::Validate => {
            let loaded = run_validate(&config)?;
            println!(
                "ok: inputs valid ({} zones, {} zone-days)",
                loaded.series.zones().len(),
                loaded.series.len()
            );
        }
        Command::Features => report_artifacts("features", &run_features(&config)?),
        Command::Labels => report_artifacts("labels", &run_labels(&config)?),
        Command::Analyze => report_artifacts("analysis", &run_analyze(&config)?),
        Command::Synth => report_artifacts("scenario", &run_synth(&config)?),
        Command::Full => report_artifacts("full run", &run_full(&config)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message: String = err
                .to_string()
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join("; ");
            eprintln!("error[{}] {message}", err.code());
            ExitCode::from(u8::try_from(err.exit_code()).unwrap_or(1))
        }
    }
}
