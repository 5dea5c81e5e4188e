//! Experiment harness: configuration, presets, the trial engine, and CSV
//! output.
//!
//! A run is described by an [`ExperimentConfig`]; presets expand one base
//! configuration into named run plans. Each plan simulates independent
//! trials in parallel, aggregates per-episode series across trials, and
//! writes one CSV per series plus a manifest echoing the configuration.

mod config;
mod engine;
mod output;

pub use config::{
    preset_runs, ChannelConfig, CombiningConfig, ExperimentConfig, PilotMode, Preset, RunConfig,
    RunPlan, TrackerKind, TrackingConfig,
};
pub use engine::{
    run_experiment, run_trial, sinr_variant_names, stream_seed, CombinerRow, ExperimentResult,
    SeriesStat, TrajectoryRow, TrialSeries, STREAM_LINKS, STREAM_NOISE, STREAM_POLICY,
    STREAM_PROB, STREAM_WALK,
};
pub use output::{
    write_combiner_csv, write_manifest, write_prob_csv, write_series_csv, write_trajectory_csv,
    ProbRow,
};

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::thresholds::{calibrate, default_x_grid, prob_exceed, CalibratedThresholds};
use rand::SeedableRng;

/// Samples per grid point in probability sweeps and calibration.
pub const PROB_SAMPLES: usize = 100_000;

/// Simulates one run plan and writes its series files; returns the file
/// names written into `out_dir`.
fn run_plan(plan: &RunPlan, out_dir: &Path) -> Result<Vec<String>> {
    let result = run_experiment(&plan.config)
        .with_context(|| format!("running plan {}", plan.name))?;
    let mut files = Vec::new();

    let power_name = format!("power_{}.csv", plan.name);
    write_series_csv(&out_dir.join(&power_name), 1, &result.sum_power)?;
    files.push(power_name);

    let overhead_name = format!("overhead_{}.csv", plan.name);
    write_series_csv(&out_dir.join(&overhead_name), 1, &result.overhead)?;
    files.push(overhead_name);

    for (variant, stat) in &result.sinr {
        let name = format!("sinr_{}_{}.csv", variant, plan.name);
        write_series_csv(&out_dir.join(&name), result.episodes_initial + 1, stat)?;
        files.push(name);
    }

    if !result.trajectory.is_empty() {
        let name = format!("trajectory_{}.csv", plan.name);
        write_trajectory_csv(&out_dir.join(&name), &result.trajectory)?;
        files.push(name);
    }

    if !result.combiner_log.is_empty() {
        let name = format!("combining_{}.csv", plan.name);
        write_combiner_csv(&out_dir.join(&name), &result.combiner_log)?;
        files.push(name);
    }

    let cfg_name = format!("{}.config.toml", plan.name);
    fs::write(out_dir.join(&cfg_name), toml::to_string_pretty(&plan.config)?)?;
    files.push(cfg_name);
    Ok(files)
}

/// Sweeps the reward-decision misfire probability over power ratios for
/// both thresholds at the configured and a high reference SNR.
fn run_probability_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>> {
    let xs: Vec<f64> = (5..=15).map(|i| f64::from(i) / 10.0).collect();
    let mut snrs = vec![cfg.channel.snr_db];
    if cfg.channel.snr_db != 50.0 {
        snrs.push(50.0);
    }
    let cs = [cfg.tracking.c_upper, cfg.tracking.c_lower];
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &snr_db in &snrs {
        for &c in &cs {
            for &x in &xs {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(stream_seed(cfg.run.seed, cell, STREAM_PROB));
                let est = prob_exceed(x, snr_db, c, PROB_SAMPLES, &mut rng);
                rows.push(ProbRow {
                    x,
                    snr_db,
                    c,
                    prob: est.prob,
                    stderr: est.stderr,
                });
                cell += 1;
            }
        }
    }
    write_prob_csv(&out_dir.join("prob_exceed.csv"), &rows)?;
    Ok(vec!["prob_exceed.csv".to_string()])
}

/// Expands the preset against the base configuration, runs every plan, and
/// writes all outputs plus `manifest.txt`. Returns the written file names.
pub fn execute_run(preset: Preset, base: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let mut written = Vec::new();
    if preset == Preset::Fig9 {
        written.extend(run_probability_sweep(base, out_dir)?);
    } else {
        for plan in preset_runs(preset, base) {
            written.extend(run_plan(&plan, out_dir)?);
        }
    }
    write_manifest(out_dir, &preset.to_string(), base, &written)?;
    written.push("manifest.txt".to_string());
    Ok(written)
}

#[derive(Serialize)]
struct CalibrationReport {
    snr_db: f64,
    target: f64,
    samples: usize,
    c_upper: f64,
    c_lower: f64,
}

/// Calibrates reward thresholds for an operating SNR and writes
/// `thresholds.toml` into `out_dir`.
pub fn execute_calibrate(
    snr_db: f64,
    target: f64,
    samples: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<CalibratedThresholds> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, 0, STREAM_PROB));
    let grid = default_x_grid();
    let cal = calibrate(snr_db, target, &grid, samples, &mut rng)?;
    let report = CalibrationReport {
        snr_db,
        target,
        samples,
        c_upper: cal.c_upper,
        c_lower: cal.c_lower,
    };
    fs::write(
        out_dir.join("thresholds.toml"),
        toml::to_string_pretty(&report)?,
    )?;
    Ok(cal)
}

// ── Tests ────────────────────────────────────────────────────────────────────
