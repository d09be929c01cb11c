use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use declab::commands;
use declab::scenario::EngineChoice;

/// Expectation-value decoherence dynamics of closed spin-bath systems and
/// cosmological mode classicality diagnostics.
#[derive(Parser)]
#[command(name = "declab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: series CSV, verdict JSON and optional SVG plot.
    Run {
        config: PathBuf,
        /// Engine: closed form, dense oracle, or both with a cross-check.
        #[arg(long, value_enum, default_value_t = EngineChoice::Auto)]
        engine: EngineChoice,
        /// Directory receiving the output files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Replaces the generator seed declared in the config.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run a scenario template over a parameter axis; one summary row per
    /// point.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineChoice::Auto)]
        engine: EngineChoice,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Concurrent sweep workers (falls back to DECLAB_WORKERS, then to
        /// the machine parallelism).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Integrate perturbation modes: per-k trajectory CSVs and an
    /// ensemble-comparison JSON.
    CosmoRun {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Concurrent modes (falls back to DECLAB_WORKERS, then to the
        /// machine parallelism).
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            engine,
            out_dir,
            seed_override,
        } => commands::run(config, *engine, out_dir, *seed_override),
        Command::Sweep {
            config,
            engine,
            out_dir,
            seed_override,
            workers,
        } => commands::sweep(config, *engine, out_dir, *seed_override, *workers),
        Command::CosmoRun {
            config,
            out_dir,
            seed_override,
            workers,
        } => commands::cosmo_run(config, out_dir, *seed_override, *workers),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
