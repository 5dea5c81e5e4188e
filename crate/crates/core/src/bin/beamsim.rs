//! Command-line front end: `run` simulates an experiment preset or custom
//! configuration into CSV series, `calibrate` fits reward thresholds for an
//! operating SNR. Exits nonzero with a message on configuration or IO
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use beamsim::harness::{execute_calibrate, execute_run, ExperimentConfig, Preset};

#[derive(Parser)]
#[command(
    name = "beamsim",
    version,
    about = "Millimeter-wave multi-link beam tracking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an experiment and write CSV series plus a manifest.
    Run {
        /// TOML configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Experiment preset: fig4, fig5, fig6_7, fig8, fig9, or custom.
        #[arg(long, default_value = "custom")]
        preset: String,
        /// Override the trial count of the base configuration.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed of the base configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for CSV files and the manifest.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; 0 uses all cores. Never affects results.
        #[arg(long)]
        workers: Option<usize>,
        /// Emit per-episode trajectory logs for single-follower plans.
        #[arg(long)]
        logs: bool,
    },
    /// Calibrate reward thresholds for an operating SNR.
    Calibrate {
        /// Operating SNR in dB.
        #[arg(long)]
        snr: f64,
        /// Target misfire probability per threshold.
        #[arg(long, default_value_t = 0.1)]
        target: f64,
        /// Monte-Carlo samples per grid point.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// RNG seed.
        #[arg(long, default_value_t = 7240)]
        seed: u64,
        /// Output directory for thresholds.toml.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            preset,
            trials,
            seed,
            out,
            workers,
            logs,
        } => {
            let preset: Preset = preset.parse().map_err(anyhow::Error::msg)?;
            let mut base = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(t) = trials {
                base.run.trials = t;
            }
            if let Some(s) = seed {
                base.run.seed = s;
            }
            if let Some(w) = workers {
                base.run.workers = w;
            }
            if logs {
                base.run.emit_logs = true;
            }
            let files = execute_run(preset, &base, &out)?;
            for f in &files {
                println!("{}", out.join(f).display());
            }
            Ok(())
        }
        Command::Calibrate {
            snr,
            target,
            samples,
            seed,
            out,
        } => {
            let cal = execute_calibrate(snr, target, samples, seed, &out)?;
            println!("c_upper = {:.6}", cal.c_upper);
            println!("c_lower = {:.6}", cal.c_lower);
            println!("{}", out.join("thresholds.toml").display());
            Ok(())
        }
    }
}
