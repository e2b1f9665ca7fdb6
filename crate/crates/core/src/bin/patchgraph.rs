// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end over the staged pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use patchgraph::pipeline::{Pipeline, StageOutcome, StudyConfig};
use patchgraph::Result;

#[derive(Parser)]
#[command(name = "patchgraph", version, about = "Patch-effect graph studies")]
struct Cli {
    /// JSON study configuration (defaults apply to omitted fields).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the study seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Study output directory.
    #[arg(long, global = true, default_value = "patchgraph-out")]
    out: PathBuf,
    /// Rerun stages even when their artifacts match the config hash.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one effect tensor directory per slice.
    Generate,
    /// Build full-pool and bootstrap graphs per slice.
    Graphs,
    /// Embed bootstrap graphs and export PCA scatters.
    Embed,
    /// Run the classification benchmark.
    Bench,
    /// Run the screened paired-patching study.
    Screen,
    /// Export mean-effect heatmaps.
    Heatmap,
    /// Run every stage in order.
    RunAll,
}

fn report(stage: &str, outcome: StageOutcome) {
    match outcome {
        StageOutcome::Ran => eprintln!("{stage}: done"),
        StageOutcome::Skipped => eprintln!("{stage}: up to date (use --force to rerun)"),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => StudyConfig::load(path)?,
        None => StudyConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let pipeline = Pipeline::new(config, &cli.out, cli.force)?;
    let stage = match cli.command {
        Command::Generate => "generate",
        Command::Graphs => "graphs",
        Command::Embed => "embed",
        Command::Bench => "bench",
        Command::Screen => "screen",
        Command::Heatmap => "heatmap",
        Command::RunAll => {
            for (stage, outcome) in pipeline.run_all()? {
                report(stage, outcome);
            }
            return Ok(());
        }
    };
    report(stage, pipeline.run_stage(stage)?);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
