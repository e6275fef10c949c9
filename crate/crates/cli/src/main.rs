//! `gsanatomy` command-line driver.
//!
//! Every subcommand stages its outputs in memory and writes them, together
//! with a manifest of inputs and digests, only after the analysis succeeds.
//! Exit codes: 0 on success, 2 for bad input or configuration, 1 otherwise.

mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Outcome};
use config::Config;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "gsanatomy", version, about = "Statistical anatomy of converged Gaussian-splat scenes")]
struct Cli {
    /// Global seed; every random draw is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print a JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mixture analysis of scale spectra and radiance.
    Stats {
        /// Splat PLY file.
        splats: PathBuf,
    },
    /// Density blocks, terciles and splat coverage.
    Stratify {
        splats: PathBuf,
        /// Point cloud (PLY or COLMAP points3D.txt).
        cloud: PathBuf,
        /// Target block count, overriding `[density] blocks`.
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Per-block MLP probes on an existing stratification.
    Probe {
        /// `stratification.json` written by `stratify`.
        stratification: PathBuf,
        splats: PathBuf,
        cloud: PathBuf,
        /// Also write each trained network under `models/`.
        #[arg(long)]
        save_models: bool,
    },
    /// Single-Gaussian gradient experiments.
    Simulate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Stats { .. } => "stats",
            Command::Stratify { .. } => "stratify",
            Command::Probe { .. } => "probe",
            Command::Simulate => "simulate",
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let config = Config::load(cli.config.as_deref())?;
    let ctx = Context { seed: cli.seed, config };
    let Outcome {
        artifacts,
        inputs,
        summary,
    } = match &cli.command {
        Command::Stats { splats } => commands::stats::run(&ctx, splats)?,
        Command::Stratify { splats, cloud, blocks } => commands::stratify::run(&ctx, splats, cloud, *blocks)?,
        Command::Probe {
            stratification,
            splats,
            cloud,
            save_models,
        } => commands::probe::run(
            &ctx,
            &commands::probe::ProbeArgs {
                stratification,
                splats,
                cloud,
                save_models: *save_models,
            },
        )?,
        Command::Simulate => commands::simulate::run(&ctx)?,
    };
    let written = artifacts.commit(&cli.out, cli.command.name(), &ctx.config, &inputs, cli.seed)?;
    if cli.json {
        let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
        let doc = serde_json::json!({
            "command": cli.command.name(),
            "seed": cli.seed,
            "outputs": files,
            "summary": summary,
        });
        let text = gsanatomy::ingest::to_canonical_json(&doc).map_err(|e| CliError::Internal(e.to_string()))?;
        print!("{text}");
    } else {
        eprintln!("wrote {} files to {}", written.len(), cli.out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
