//! Trial engine: builds a randomized environment per trial, runs the
//! configured tracker episode by episode, and aggregates per-episode
//! metrics across trials.
//!
//! Every random quantity derives from `(run.seed, trial index, stream)`
//! through a fixed mixing function, so a trial's output is bit-identical
//! for any worker count or execution order.

use std::f64::consts::TAU;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::array_geometry::{build_codebook, uniform_azimuths_deg, ArrayShape};
use crate::channel::{true_sinr, AngleWalk, LinkChannel, NoiseModel, Observation, SimEnv};
use crate::combiner::{
    approx_sinr, candidate_sets, effective_channel, enumerate_combos, equal_gain_weights,
    gram_matrix, optimal_weights, select_best_combo, CandidateSets, CombinerError,
};
use crate::gradient::GradientTracker;
use crate::numerics::{C64, CVec};
use crate::qlearning::{
    BeamState, EpisodeReport, LearnParams, ObservationStore, QLearningTracker, RewardThresholds,
};

use super::config::{ExperimentConfig, TrackerKind};

// ── Seeding ──────────────────────────────────────────────────────────────────

/// Stream labels mixed into per-trial seeds.
pub const STREAM_LINKS: u64 = 0;
pub const STREAM_WALK: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_POLICY: u64 = 3;
pub const STREAM_PROB: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed for one RNG stream of one trial.
pub fn stream_seed(master: u64, trial: u64, stream: u64) -> u64 {
    splitmix64(
        master
            ^ splitmix64(trial.wrapping_add(1))
            ^ splitmix64(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    )
}

// ── Per-trial series ─────────────────────────────────────────────────────────

/// One row of the single-follower trajectory log.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryRow {
    pub episode: usize,
    pub aoa_azimuth_deg: f64,
    pub lead_beam_azimuth_deg: f64,
    pub aod_azimuth_deg: f64,
    pub follower_beam_azimuth_deg: f64,
    pub n_f: usize,
    pub n_w: usize,
    pub gain_db: f64,
}

/// One row of the combining selection log.
#[derive(Clone, Debug)]
pub struct CombinerRow {
    pub trial: u64,
    pub episode: usize,
    /// Index into the episode's enumeration, or -1 for the fallback
    /// assignment when no complete combination existed.
    pub combo_id: i64,
    pub k: usize,
    /// Sum over followers of the SINR estimated from stored observations.
    pub approx_sum_sinr: f64,
    /// Per-follower SINR under the selected weights, evaluated on the exact
    /// channel, in dB.
    pub true_sinr_db: Vec<f64>,
}

/// Per-episode series from one independent trial.
#[derive(Clone, Debug)]
pub struct TrialSeries {
    /// Total received power over noise in dB at the episode's final slot.
    pub sum_power_db: Vec<f64>,
    /// Cumulative pilot reduction against transmitting every slot; zero
    /// during the initial search.
    pub overhead_reduction: Vec<f64>,
    /// Follower-mean estimated SINR (linear) per combining variant, tracking
    /// episodes only. Empty when combining is disabled.
    pub sinr_linear: Vec<Vec<f64>>,
    /// Per-episode selection log; populated for single-follower runs with
    /// `run.emit_logs`.
    pub trajectory: Vec<TrajectoryRow>,
    /// Per-episode weight-selection log; populated for combining runs with
    /// `run.emit_logs`.
    pub combiner_log: Vec<CombinerRow>,
}

/// Names for the SINR series, index-aligned with `TrialSeries::sinr_linear`.
pub fn sinr_variant_names(enabled: bool, candidates: usize) -> Vec<String> {
    if !enabled {
        return Vec::new();
    }
    let mut names = vec!["equal_gain".to_string()];
    names.extend((1..=candidates).map(|k| format!("optimal_k{k}")));
    names
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn mean_linear(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

// ── Tracker dispatch ─────────────────────────────────────────────────────────

enum Tracker {
    Learned(Box<QLearningTracker<ChaCha8Rng>>),
    Gradient(GradientTracker),
}

impl Tracker {
    fn run_initial(&mut self, env: &mut SimEnv, episode: usize) -> EpisodeReport {
        match self {
            Tracker::Learned(t) => t.run_initial_episode(env, episode),
            Tracker::Gradient(t) => t.run_initial_episode(env, episode),
        }
    }

    fn run_tracking(&mut self, env: &mut SimEnv, episode: usize) -> EpisodeReport {
        match self {
            Tracker::Learned(t) => t.run_tracking_episode(env, episode),
            Tracker::Gradient(t) => t.run_tracking_episode(env, episode),
        }
    }

    fn store(&self) -> &ObservationStore {
        match self {
            Tracker::Learned(t) => t.store(),
            Tracker::Gradient(t) => t.store(),
        }
    }

    fn record(&mut self, obs: Observation) {
        match self {
            Tracker::Learned(t) => t.record_observation(obs),
            Tracker::Gradient(_) => unreachable!("combining runs use the learned tracker"),
        }
    }
}

// ── Single trial ─────────────────────────────────────────────────────────────

fn elevation_draw(rng: &mut ChaCha8Rng, zone: (f64, f64)) -> f64 {
    if zone.1 > zone.0 {
        rng.gen_range(zone.0..zone.1)
    } else {
        zone.0
    }
}

fn trajectory_row(episode: usize, env: &SimEnv, state: BeamState) -> TrajectoryRow {
    let walk = &env.links()[0].walk;
    TrajectoryRow {
        episode,
        aoa_azimuth_deg: walk.aoa().azimuth_deg(),
        lead_beam_azimuth_deg: env.lead_book().angles(state.n_f).azimuth_deg(),
        aod_azimuth_deg: walk.aod().azimuth_deg(),
        follower_beam_azimuth_deg: env.follower_book().angles(state.n_w).azimuth_deg(),
        n_f: state.n_f,
        n_w: state.n_w,
        gain_db: db(env.true_power(0, state.n_f, state.n_w) / env.noise().sigma_n_sq),
    }
}

/// Fills the extra pilot slot that precedes weight selection: every
/// candidate and fallback cross pair is measured in the same slot, so no
/// pair lacks a current observation and selection works from a coherent
/// snapshot. Costs one pilot per follower at the call site.
fn run_probe_slot(
    tracker: &mut Tracker,
    env: &mut SimEnv,
    cands: &CandidateSets,
    fallback: &[BeamState],
) {
    let u_count = env.u_count();
    let mut f_union: Vec<usize> = Vec::new();
    for list in &cands.f_lists {
        for &f in list {
            if !f_union.contains(&f) {
                f_union.push(f);
            }
        }
    }
    for s in fallback {
        if !f_union.contains(&s.n_f) {
            f_union.push(s.n_f);
        }
    }
    f_union.sort_unstable();
    for u in 0..u_count {
        let mut w_set = cands.w_lists[u].clone();
        if !w_set.contains(&fallback[u].n_w) {
            w_set.push(fallback[u].n_w);
        }
        w_set.sort_unstable();
        for &f in &f_union {
            for &w in &w_set {
                let obs = env.measure(u, f, w);
                tracker.record(obs);
            }
        }
    }
}

/// Runs one independent trial and returns its per-episode series.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialSeries> {
    let ch = &cfg.channel;
    let tr = &cfg.tracking;
    let u_count = ch.followers;
    let shape = ArrayShape {
        nx: ch.array_nx,
        ny: ch.array_ny,
    };
    let lead_book = build_codebook(
        &uniform_azimuths_deg(ch.lead_azimuth_count),
        &ch.lead_elevations_deg,
        shape,
    )
    .context("lead codebook")?;
    let follower_book = build_codebook(
        &uniform_azimuths_deg(ch.follower_azimuth_count),
        &ch.follower_elevations_deg,
        shape,
    )
    .context("follower codebook")?;
    let n_f_max = lead_book.len();
    let n_w_max = follower_book.len();

    let seed = cfg.run.seed;
    let mut link_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, trial, STREAM_LINKS));
    let walk_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, trial, STREAM_WALK));
    let noise_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, trial, STREAM_NOISE));
    let policy_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, trial, STREAM_POLICY));

    let rho_power = 1.0 / u_count as f64;
    let zone = match ch.fixed_elevation_deg {
        Some(e) => (e.to_radians(), e.to_radians()),
        None => (
            ch.elevation_zone_deg[0].to_radians(),
            ch.elevation_zone_deg[1].to_radians(),
        ),
    };
    let links: Vec<LinkChannel> = (0..u_count)
        .map(|_| {
            let phase = link_rng.gen_range(0.0..TAU);
            let aoa_azimuth_rad = link_rng.gen_range(0.0..TAU);
            let aoa_elevation_rad = elevation_draw(&mut link_rng, zone);
            let aod_azimuth_rad = link_rng.gen_range(0.0..TAU);
            let aod_elevation_rad = elevation_draw(&mut link_rng, zone);
            LinkChannel {
                rho: C64::from_polar(rho_power.sqrt(), phase),
                walk: AngleWalk {
                    aoa_azimuth_rad,
                    aoa_elevation_rad,
                    aod_azimuth_rad,
                    aod_elevation_rad,
                    sigma_lambda_sq: ch.walk_variance_deg_sq,
                    aoa_elevation_bounds_rad: zone,
                    aod_elevation_bounds_rad: zone,
                },
            }
        })
        .collect();

    let noise = NoiseModel::at_snr_db(ch.snr_db, rho_power);
    let sigma_n_sq = noise.sigma_n_sq;
    let mut env = SimEnv::new(links, lead_book, follower_book, noise, walk_rng, noise_rng);

    let params = LearnParams {
        alpha: tr.alpha,
        gamma: tr.gamma,
        epsilon: tr.epsilon,
    };
    let thresholds = RewardThresholds::new(tr.c_upper, tr.c_lower);
    let mut tracker = match tr.tracker {
        TrackerKind::QLearning => Tracker::Learned(Box::new(QLearningTracker::new(
            u_count,
            n_f_max,
            n_w_max,
            tr.initial_episodes,
            tr.steps_per_episode,
            params,
            thresholds,
            tr.mode.into(),
            policy_rng,
        ))),
        TrackerKind::Gradient => Tracker::Gradient(GradientTracker::new(
            u_count,
            n_f_max,
            n_w_max,
            tr.initial_episodes,
            tr.steps_per_episode,
        )),
    };

    let n_init = tr.initial_episodes;
    let n_track = tr.tracking_episodes;
    let n_steps = tr.steps_per_episode;
    let digital = cfg.combining.enabled;
    let k = cfg.combining.candidates;
    let total = n_init + n_track;

    let mut sum_power_db = Vec::with_capacity(total);
    let mut overhead = Vec::with_capacity(total);
    let variant_count = if digital { 1 + k } else { 0 };
    let mut sinr_linear = vec![Vec::with_capacity(n_track); variant_count];
    let mut trajectory = Vec::new();
    let mut combiner_log = Vec::new();
    let log_trajectory = cfg.run.emit_logs && u_count == 1;
    let log_combiner = cfg.run.emit_logs && digital;
    let mut last_state: Option<BeamState> = None;

    for e in 0..n_init {
        if log_trajectory {
            if let Some(s) = last_state {
                trajectory.push(trajectory_row(e, &env, s));
            }
        }
        let rep = tracker.run_initial(&mut env, e);
        sum_power_db.push(db(rep.end_powers.iter().sum::<f64>() / sigma_n_sq));
        overhead.push(0.0);
        last_state = Some(rep.end_states[0]);
    }

    let mut pilots_cum = 0usize;
    for e in 0..n_track {
        let episode = n_init + e;
        if log_trajectory {
            if let Some(s) = last_state {
                trajectory.push(trajectory_row(episode, &env, s));
            }
        }
        let rep = tracker.run_tracking(&mut env, episode);
        pilots_cum += rep.pilots;
        sum_power_db.push(db(rep.end_powers.iter().sum::<f64>() / sigma_n_sq));

        if digital {
            let cands_by_k: Vec<CandidateSets> = (1..=k)
                .map(|kk| candidate_sets(tracker.store(), kk))
                .collect();
            run_probe_slot(&mut tracker, &mut env, &cands_by_k[k - 1], &rep.end_states);
            pilots_cum += u_count;

            let fallback_f: Vec<usize> = rep.end_states.iter().map(|s| s.n_f).collect();
            let fallback_w: Vec<usize> = rep.end_states.iter().map(|s| s.n_w).collect();
            let end_gram = gram_matrix(env.lead_book(), &fallback_f);
            let h_end: Vec<CVec> = (0..u_count)
                .map(|v| {
                    effective_channel(tracker.store(), v, &fallback_f, fallback_w[v])
                        .expect("the probe slot covers every fallback cross pair")
                })
                .collect();
            let eq = approx_sinr(&equal_gain_weights(u_count), &end_gram, &h_end, sigma_n_sq);
            sinr_linear[0].push(mean_linear(&eq));

            for (i, cands) in cands_by_k.iter().enumerate() {
                let combos = enumerate_combos(cands)?;
                let (combo_id, f_sel, w_sel, weights) =
                    match select_best_combo(&combos, tracker.store(), env.lead_book(), sigma_n_sq)
                    {
                        Ok(sel) => {
                            let combo = &combos[sel.index];
                            (
                                sel.index as i64,
                                combo.f_idx.clone(),
                                combo.w_idx.clone(),
                                sel.weights,
                            )
                        }
                        Err(CombinerError::NoCompleteCombo) => (
                            -1,
                            fallback_f.clone(),
                            fallback_w.clone(),
                            optimal_weights(&end_gram, &h_end, sigma_n_sq)?,
                        ),
                        Err(err) => return Err(err.into()),
                    };
                sinr_linear[i + 1].push(mean_linear(&weights.approx_sinr));
                if log_combiner {
                    let truth = true_sinr(
                        env.links(),
                        env.lead_book(),
                        env.follower_book(),
                        &f_sel,
                        &w_sel,
                        &weights.f_b,
                        env.noise(),
                    )?;
                    combiner_log.push(CombinerRow {
                        trial,
                        episode: episode + 1,
                        combo_id,
                        k: i + 1,
                        approx_sum_sinr: weights.approx_sinr.iter().sum(),
                        true_sinr_db: truth.iter().map(|&s| db(s)).collect(),
                    });
                }
            }
            env.advance();
        }

        overhead.push(1.0 - pilots_cum as f64 / (u_count * n_steps * (e + 1)) as f64);
        last_state = Some(rep.end_states[0]);
    }
    if log_trajectory {
        if let Some(s) = last_state {
            trajectory.push(trajectory_row(total, &env, s));
        }
    }

    Ok(TrialSeries {
        sum_power_db,
        overhead_reduction: overhead,
        sinr_linear,
        trajectory,
        combiner_log,
    })
}

// ── Aggregation ──────────────────────────────────────────────────────────────

/// Pointwise mean and standard error of one series across trials.
#[derive(Clone, Debug)]
pub struct SeriesStat {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

fn aggregate<'a, I: Iterator<Item = &'a Vec<f64>> + Clone>(rows: I) -> SeriesStat {
    let n = rows.clone().count();
    let len = rows.clone().next().map_or(0, |r| r.len());
    let mut mean = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for i in 0..len {
        let sum: f64 = rows.clone().map(|r| r[i]).sum();
        let m = sum / n as f64;
        mean[i] = m;
        if n > 1 {
            let var: f64 = rows.clone().map(|r| (r[i] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            stderr[i] = (var / n as f64).sqrt();
        }
    }
    SeriesStat { mean, stderr }
}

/// Averages a linear series across trials and reports it in dB, with the
/// standard error mapped through the same log transform.
fn aggregate_linear_to_db<'a, I: Iterator<Item = &'a Vec<f64>> + Clone>(rows: I) -> SeriesStat {
    let linear = aggregate(rows);
    let mean: Vec<f64> = linear.mean.iter().map(|&m| db(m)).collect();
    let stderr: Vec<f64> = linear
        .mean
        .iter()
        .zip(&linear.stderr)
        .map(|(&m, &se)| {
            if m > 0.0 {
                10.0 / std::f64::consts::LN_10 * se / m
            } else {
                0.0
            }
        })
        .collect();
    SeriesStat { mean, stderr }
}

/// Aggregated output of one run plan.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub sum_power: SeriesStat,
    pub overhead: SeriesStat,
    /// `(variant name, series)` pairs; empty when combining is disabled.
    pub sinr: Vec<(String, SeriesStat)>,
    /// Trajectory of the first trial when logs are enabled.
    pub trajectory: Vec<TrajectoryRow>,
    /// Weight-selection log of the first trial when logs are enabled.
    pub combiner_log: Vec<CombinerRow>,
    pub episodes_initial: usize,
}

/// Validates the configuration, simulates all trials, and aggregates the
/// series. Worker count shapes only the schedule, never the numbers.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let work = || {
        (0..cfg.run.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect::<Result<Vec<TrialSeries>>>()
    };
    let trials = if cfg.run.workers == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.workers)
            .build()
            .context("building worker pool")?
            .install(work)?
    };

    let sum_power = aggregate(trials.iter().map(|t| &t.sum_power_db));
    let overhead = aggregate(trials.iter().map(|t| &t.overhead_reduction));
    let names = sinr_variant_names(cfg.combining.enabled, cfg.combining.candidates);
    let sinr = names
        .into_iter()
        .enumerate()
        .map(|(v, name)| {
            (
                name,
                aggregate_linear_to_db(trials.iter().map(move |t| &t.sinr_linear[v])),
            )
        })
        .collect();
    let (trajectory, combiner_log) = trials
        .into_iter()
        .next()
        .map(|t| (t.trajectory, t.combiner_log))
        .unwrap_or_default();
    Ok(ExperimentResult {
        sum_power,
        overhead,
        sinr,
        trajectory,
        combiner_log,
        episodes_initial: cfg.tracking.initial_episodes,
    })
}

// ── Tests ────────────────────────────────────────────────────────────────────
