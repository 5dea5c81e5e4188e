//! CSV and manifest writers for experiment results.
//!
//! Every series file carries the header `episode,value,stderr`; values are
//! printed with six decimal places so reruns diff cleanly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use super::config::ExperimentConfig;
use super::engine::{CombinerRow, SeriesStat, TrajectoryRow};

/// One row of the misfire probability sweep.
#[derive(Clone, Copy, Debug)]
pub struct ProbRow {
    pub x: f64,
    pub snr_db: f64,
    pub c: f64,
    pub prob: f64,
    pub stderr: f64,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes a per-episode series; rows are numbered from `first_episode`.
pub fn write_series_csv(path: &Path, first_episode: usize, stat: &SeriesStat) -> Result<()> {
    let mut text = String::from("episode,value,stderr\n");
    for (i, (mean, stderr)) in stat.mean.iter().zip(&stat.stderr).enumerate() {
        writeln!(text, "{},{:.6},{:.6}", first_episode + i, mean, stderr)?;
    }
    write_text(path, &text)
}

/// Writes the single-follower trajectory log.
pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut text = String::from(
        "episode,aoa_azimuth_deg,lead_beam_azimuth_deg,aod_azimuth_deg,\
         follower_beam_azimuth_deg,n_f,n_w,gain_db\n",
    );
    for r in rows {
        writeln!(
            text,
            "{},{:.6},{:.6},{:.6},{:.6},{},{},{:.6}",
            r.episode,
            r.aoa_azimuth_deg,
            r.lead_beam_azimuth_deg,
            r.aod_azimuth_deg,
            r.follower_beam_azimuth_deg,
            r.n_f,
            r.n_w,
            r.gain_db
        )?;
    }
    write_text(path, &text)
}

/// Writes the per-episode weight-selection log. True-SINR columns are one
/// per follower, sized from the first row.
pub fn write_combiner_csv(path: &Path, rows: &[CombinerRow]) -> Result<()> {
    let followers = rows.first().map_or(0, |r| r.true_sinr_db.len());
    let mut text = String::from("trial,episode,combo_id,k,approx_sum_sinr");
    for u in 1..=followers {
        write!(text, ",true_sinr_db_u{u}")?;
    }
    text.push('\n');
    for r in rows {
        write!(
            text,
            "{},{},{},{},{:.6}",
            r.trial, r.episode, r.combo_id, r.k, r.approx_sum_sinr
        )?;
        for v in &r.true_sinr_db {
            write!(text, ",{v:.6}")?;
        }
        text.push('\n');
    }
    write_text(path, &text)
}

/// Writes the misfire probability sweep.
pub fn write_prob_csv(path: &Path, rows: &[ProbRow]) -> Result<()> {
    let mut text = String::from("x,snr_db,c,prob,stderr\n");
    for r in rows {
        writeln!(
            text,
            "{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.x, r.snr_db, r.c, r.prob, r.stderr
        )?;
    }
    write_text(path, &text)
}

/// Writes the run manifest: preset, output listing, and the base
/// configuration echoed as TOML (the comment header keeps it parseable).
pub fn write_manifest(
    dir: &Path,
    preset: &str,
    base: &ExperimentConfig,
    outputs: &[String],
) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "# run manifest")?;
    writeln!(text, "# preset: {preset}")?;
    writeln!(text, "# outputs:")?;
    for f in outputs {
        writeln!(text, "#   {f}")?;
    }
    writeln!(text, "# base configuration:")?;
    text.push_str(&toml::to_string_pretty(base)?);
    write_text(&dir.join("manifest.txt"), &text)
}

// ── Tests ────────────────────────────────────────────────────────────────────
