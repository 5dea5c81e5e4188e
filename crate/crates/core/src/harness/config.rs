//! Run configuration: TOML-backed sections with defaults, validation, and
//! the preset run plans expanded from a base configuration.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::qlearning::Mode;

// ── Enumerations ─────────────────────────────────────────────────────────────

/// Which tracking policy drives the analog beams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackerKind {
    #[serde(rename = "qlearning")]
    QLearning,
    #[serde(rename = "gradient")]
    Gradient,
}

impl fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackerKind::QLearning => write!(f, "qlearning"),
            TrackerKind::Gradient => write!(f, "gradient"),
        }
    }
}

/// Pilot policy for the learned tracker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotMode {
    Online,
    OnlineOffline,
}

impl fmt::Display for PilotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PilotMode::Online => write!(f, "online"),
            PilotMode::OnlineOffline => write!(f, "online_offline"),
        }
    }
}

impl From<PilotMode> for Mode {
    fn from(mode: PilotMode) -> Mode {
        match mode {
            PilotMode::Online => Mode::Online,
            PilotMode::OnlineOffline => Mode::OnlineOffline,
        }
    }
}

// ── Sections ─────────────────────────────────────────────────────────────────

/// Geometry, codebooks, and channel dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub followers: usize,
    pub array_nx: usize,
    pub array_ny: usize,
    pub lead_azimuth_count: usize,
    pub lead_elevations_deg: Vec<f64>,
    pub follower_azimuth_count: usize,
    pub follower_elevations_deg: Vec<f64>,
    pub snr_db: f64,
    pub walk_variance_deg_sq: f64,
    pub elevation_zone_deg: [f64; 2],
    /// Pins both link elevations to one value and disables their drift.
    pub fixed_elevation_deg: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            followers: 3,
            array_nx: 4,
            array_ny: 4,
            lead_azimuth_count: 12,
            lead_elevations_deg: vec![15.0],
            follower_azimuth_count: 12,
            follower_elevations_deg: vec![15.0, 45.0, 75.0],
            snr_db: 20.0,
            walk_variance_deg_sq: 16.0,
            elevation_zone_deg: [0.0, 30.0],
            fixed_elevation_deg: None,
        }
    }
}

/// Tracker choice, episode schedule, and learning parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    pub tracker: TrackerKind,
    pub mode: PilotMode,
    pub initial_episodes: usize,
    pub tracking_episodes: usize,
    pub steps_per_episode: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub c_upper: f64,
    pub c_lower: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            tracker: TrackerKind::QLearning,
            mode: PilotMode::Online,
            initial_episodes: 30,
            tracking_episodes: 200,
            steps_per_episode: 4,
            alpha: 0.5,
            gamma: 0.5,
            epsilon: 0.1,
            c_upper: 1.1,
            c_lower: 0.9,
        }
    }
}

/// Digital combining stage on top of the tracked analog beams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombiningConfig {
    pub enabled: bool,
    /// Strongest stored pairs per follower that seed the candidate lists.
    pub candidates: usize,
}

impl Default for CombiningConfig {
    fn default() -> Self {
        CombiningConfig {
            enabled: false,
            candidates: 2,
        }
    }
}

/// Trial count, seeding, parallelism, and optional logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Never affects results.
    pub workers: usize,
    /// Emits a per-episode trajectory CSV for single-follower runs.
    pub emit_logs: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials: 1000,
            seed: 7240,
            workers: 0,
            emit_logs: false,
        }
    }
}

/// Complete description of one simulation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    pub tracking: TrackingConfig,
    pub combining: CombiningConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn lead_codebook_len(&self) -> usize {
        self.channel.lead_azimuth_count * self.channel.lead_elevations_deg.len()
    }

    pub fn follower_codebook_len(&self) -> usize {
        self.channel.follower_azimuth_count * self.channel.follower_elevations_deg.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ch = &self.channel;
        if ch.followers == 0 {
            bail!("channel.followers must be at least 1");
        }
        if ch.array_nx == 0 || ch.array_ny == 0 {
            bail!("array dimensions must be at least 1");
        }
        if ch.lead_azimuth_count == 0 || ch.follower_azimuth_count == 0 {
            bail!("codebook azimuth counts must be at least 1");
        }
        if ch.lead_elevations_deg.is_empty() || ch.follower_elevations_deg.is_empty() {
            bail!("codebooks need at least one elevation");
        }
        if ch.followers > self.lead_codebook_len() {
            bail!("every follower needs its own lead beam; increase the lead codebook");
        }
        if ch.elevation_zone_deg[0] > ch.elevation_zone_deg[1] {
            bail!("channel.elevation_zone_deg must be ordered");
        }
        if ch.walk_variance_deg_sq < 0.0 {
            bail!("channel.walk_variance_deg_sq must be nonnegative");
        }
        let tr = &self.tracking;
        if tr.steps_per_episode == 0 {
            bail!("tracking.steps_per_episode must be at least 1");
        }
        if tr.initial_episodes == 0 {
            bail!("tracking.initial_episodes must be at least 1");
        }
        if !(tr.alpha > 0.0 && tr.alpha <= 1.0) {
            bail!("tracking.alpha must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&tr.gamma) {
            bail!("tracking.gamma must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&tr.epsilon) {
            bail!("tracking.epsilon must be in [0, 1]");
        }
        if tr.c_upper < 1.0 || tr.c_lower > 1.0 || tr.c_lower <= 0.0 {
            bail!("reward thresholds must satisfy c_upper >= 1 >= c_lower > 0");
        }
        let cb = &self.combining;
        if cb.enabled {
            if tr.tracker != TrackerKind::QLearning {
                bail!("digital combining requires the qlearning tracker");
            }
            if cb.candidates == 0 || cb.candidates > 3 {
                bail!("combining.candidates must be in 1..=3");
            }
            if ch.followers > 4 {
                bail!("digital combining supports at most 4 followers");
            }
        }
        if self.run.trials == 0 {
            bail!("run.trials must be at least 1");
        }
        Ok(())
    }
}

// ── Presets ──────────────────────────────────────────────────────────────────

/// Named experiment family expanded into one or more run plans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Single-follower trajectory demo for both trackers.
    Fig4,
    /// Learned tracker against the gradient baseline at two drift rates.
    Fig5,
    /// Online against online-offline pilot policies at two drift rates.
    Fig6_7,
    /// Digital combining variants on top of online-offline tracking.
    Fig8,
    /// Reward misfire probability sweep; no trials.
    Fig9,
    /// The base configuration as-is.
    Custom,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            "fig6_7" => Ok(Preset::Fig6_7),
            "fig8" => Ok(Preset::Fig8),
            "fig9" => Ok(Preset::Fig9),
            "custom" => Ok(Preset::Custom),
            other => Err(format!(
                "unknown preset {other:?}; expected fig4, fig5, fig6_7, fig8, fig9, or custom"
            )),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6_7 => "fig6_7",
            Preset::Fig8 => "fig8",
            Preset::Fig9 => "fig9",
            Preset::Custom => "custom",
        };
        write!(f, "{name}")
    }
}

/// One named run within a preset.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub name: String,
    pub config: ExperimentConfig,
}

fn sigma_tag(variance: f64) -> String {
    if variance.fract() == 0.0 {
        format!("sigma{}", variance as u64)
    } else {
        format!("sigma{variance}")
    }
}

/// Expands a preset into its run plans. Presets override the fields that
/// define them and keep everything else from the base configuration.
pub fn preset_runs(preset: Preset, base: &ExperimentConfig) -> Vec<RunPlan> {
    match preset {
        Preset::Custom => vec![RunPlan {
            name: "custom".to_string(),
            config: base.clone(),
        }],
        Preset::Fig4 => {
            let mut shared = base.clone();
            shared.channel.followers = 1;
            shared.channel.walk_variance_deg_sq = 16.0;
            shared.channel.fixed_elevation_deg = Some(15.0);
            shared.tracking.mode = PilotMode::Online;
            shared.combining.enabled = false;
            shared.run.trials = 1;
            shared.run.emit_logs = true;
            [TrackerKind::QLearning, TrackerKind::Gradient]
                .iter()
                .map(|&tracker| {
                    let mut config = shared.clone();
                    config.tracking.tracker = tracker;
                    RunPlan {
                        name: tracker.to_string(),
                        config,
                    }
                })
                .collect()
        }
        Preset::Fig5 => {
            let mut plans = Vec::new();
            for &tracker in &[TrackerKind::QLearning, TrackerKind::Gradient] {
                for &variance in &[4.0, 16.0] {
                    let mut config = base.clone();
                    config.tracking.tracker = tracker;
                    config.tracking.mode = PilotMode::Online;
                    config.channel.walk_variance_deg_sq = variance;
                    config.combining.enabled = false;
                    plans.push(RunPlan {
                        name: format!("{tracker}_{}", sigma_tag(variance)),
                        config,
                    });
                }
            }
            plans
        }
        Preset::Fig6_7 => {
            let mut plans = Vec::new();
            for &mode in &[PilotMode::Online, PilotMode::OnlineOffline] {
                for &variance in &[4.0, 16.0] {
                    let mut config = base.clone();
                    config.tracking.tracker = TrackerKind::QLearning;
                    config.tracking.mode = mode;
                    config.channel.walk_variance_deg_sq = variance;
                    config.combining.enabled = false;
                    plans.push(RunPlan {
                        name: format!("{mode}_{}", sigma_tag(variance)),
                        config,
                    });
                }
            }
            plans
        }
        Preset::Fig8 => [4.0, 16.0]
            .iter()
            .map(|&variance| {
                let mut config = base.clone();
                config.tracking.tracker = TrackerKind::QLearning;
                config.tracking.mode = PilotMode::OnlineOffline;
                config.channel.walk_variance_deg_sq = variance;
                config.combining.enabled = true;
                config.combining.candidates = 2;
                RunPlan {
                    name: sigma_tag(variance),
                    config,
                }
            })
            .collect(),
        Preset::Fig9 => Vec::new(),
    }
}

// ── Tests ────────────────────────────────────────────────────────────────────
