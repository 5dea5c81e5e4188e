//! Local gradient-ascent beam tracking baseline.
//!
//! The baseline keeps one selected beam pair per follower. During the initial
//! search it probes one scheduled lattice point per episode and remembers the
//! strongest, so its selection after `n` episodes is the best of `n` probes.
//! During tracking, each episode spends its `n_steps` slots measuring the
//! four circular neighbors of the selected pair in a fixed order; if the best
//! probe beats the stored power of the current pair, the follower moves one
//! step. Lead-beam claims follow the same rules as the learned tracker:
//! probes that would collide with another follower's lead beam idle instead
//! of transmitting, and conflicting moves fall back to staying put.
//!
//! The baseline consumes no policy randomness: given a channel trajectory
//! its behavior is fully deterministic.

use crate::channel::SimEnv;
use crate::qlearning::{
    de_conflict, descending_power_order, initial_search_schedule, measure_slot, Action, BeamState,
    EpisodeReport, ObservationStore, StepLog,
};

/// Neighbor probe order within a tracking episode.
const PROBE_ORDER: [Action; 4] = [Action::Up, Action::Down, Action::Right, Action::Left];

pub struct GradientTracker {
    states: Vec<BeamState>,
    best_seen: Vec<Option<(BeamState, f64)>>,
    latest_power: Vec<f64>,
    store: ObservationStore,
    schedule: Vec<BeamState>,
    schedule_offsets: Vec<usize>,
    n_steps: usize,
    n_f_max: usize,
    n_w_max: usize,
    initialized: bool,
}

impl GradientTracker {
    pub fn new(
        u_count: usize,
        n_f_max: usize,
        n_w_max: usize,
        n_initial_episodes: usize,
        n_steps: usize,
    ) -> Self {
        assert!(u_count >= 1 && u_count <= n_f_max, "followers must fit distinct lead beams");
        assert!(n_steps >= 1);
        let spacing = n_f_max / u_count;
        GradientTracker {
            states: vec![BeamState { n_f: 1, n_w: 1 }; u_count],
            best_seen: vec![None; u_count],
            latest_power: vec![0.0; u_count],
            store: ObservationStore::new(u_count),
            schedule: initial_search_schedule(n_f_max, n_w_max, n_initial_episodes),
            schedule_offsets: (0..u_count).map(|u| u * spacing).collect(),
            n_steps,
            n_f_max,
            n_w_max,
            initialized: false,
        }
    }

    pub fn store(&self) -> &ObservationStore {
        &self.store
    }

    pub fn states(&self) -> Vec<BeamState> {
        self.states.clone()
    }

    /// Best-so-far selections with lead claims resolved in descending power
    /// order. This is both the reported state during the search phase and
    /// the starting assignment for tracking.
    fn selected_states(&self) -> Vec<BeamState> {
        let desired: Vec<BeamState> = self
            .best_seen
            .iter()
            .zip(&self.states)
            .map(|(best, &fallback)| best.map_or(fallback, |(s, _)| s))
            .collect();
        let powers: Vec<f64> = self
            .best_seen
            .iter()
            .map(|b| b.map_or(0.0, |(_, p)| p))
            .collect();
        de_conflict(&desired, &descending_power_order(&powers), self.n_f_max)
    }

    fn wrap_index(index: usize, delta: i64, max: usize) -> usize {
        let m = max as i64;
        ((index as i64 - 1 + delta).rem_euclid(m) + 1) as usize
    }

    /// Probes one scheduled lattice point per follower, then idles for the
    /// rest of the episode so time advances match the learned tracker.
    pub fn run_initial_episode(&mut self, env: &mut SimEnv, episode: usize) -> EpisodeReport {
        let u_count = self.states.len();
        let point = self.schedule[episode];
        let desired: Vec<BeamState> = self
            .schedule_offsets
            .iter()
            .map(|&off| BeamState {
                n_f: Self::wrap_index(point.n_f, off as i64, self.n_f_max),
                n_w: point.n_w,
            })
            .collect();
        let order: Vec<usize> = (0..u_count).collect();
        let starts = de_conflict(&desired, &order, self.n_f_max);

        let all = vec![true; u_count];
        let mut logs = Vec::with_capacity(u_count);
        for obs in measure_slot(env, &starts, &all) {
            self.store.record(obs);
        }
        for u in 0..u_count {
            let power = self
                .store
                .latest(u, starts[u].n_f, starts[u].n_w)
                .expect("probe was just recorded")
                .power();
            if self.best_seen[u].map_or(true, |(_, best)| power > best) {
                self.best_seen[u] = Some((starts[u], power));
            }
            self.latest_power[u] = power;
            logs.push(StepLog {
                episode,
                slot: 0,
                follower: u,
                state: starts[u],
                action: None,
                reward: None,
                pilot: true,
                power,
            });
        }
        let selected = self.selected_states();
        let end_powers = selected
            .iter()
            .enumerate()
            .map(|(u, s)| env.true_power(u, s.n_f, s.n_w))
            .collect();
        env.advance();
        for _ in 1..self.n_steps {
            env.advance();
        }

        EpisodeReport {
            pilots: u_count,
            end_states: selected,
            end_powers,
            logs,
        }
    }

    /// Probes the four neighbors of each follower's pair, one per slot, and
    /// moves a follower when its best probe beats the stored power of the
    /// pair it occupies.
    pub fn run_tracking_episode(&mut self, env: &mut SimEnv, episode: usize) -> EpisodeReport {
        let u_count = self.states.len();
        if !self.initialized {
            self.states = self.selected_states();
            self.initialized = true;
        }
        let resting = self.states.clone();
        let refs: Vec<f64> = (0..u_count)
            .map(|u| {
                self.store
                    .latest(u, resting[u].n_f, resting[u].n_w)
                    .map_or(0.0, |o| o.power())
            })
            .collect();

        let mut probed: Vec<[Option<(BeamState, f64)>; 4]> = vec![[None; 4]; u_count];
        let mut pilots = 0;
        let mut logs = Vec::new();

        for (slot, &action) in PROBE_ORDER.iter().enumerate().take(self.n_steps) {
            let order = descending_power_order(&self.latest_power);
            let mut branches = resting.clone();
            let mut transmitting = vec![false; u_count];
            let mut claims: Vec<usize> = resting.iter().map(|s| s.n_f).collect();
            for &u in &order {
                let target = resting[u].apply(action, self.n_f_max, self.n_w_max);
                let blocked = claims
                    .iter()
                    .enumerate()
                    .any(|(v, &n_f)| v != u && n_f == target.n_f);
                if blocked {
                    continue;
                }
                claims[u] = target.n_f;
                branches[u] = target;
                transmitting[u] = true;
            }
            for obs in measure_slot(env, &branches, &transmitting) {
                self.store.record(obs);
            }
            for u in 0..u_count {
                if transmitting[u] {
                    let power = self
                        .store
                        .latest(u, branches[u].n_f, branches[u].n_w)
                        .expect("probe was just recorded")
                        .power();
                    probed[u][slot] = Some((branches[u], power));
                    self.latest_power[u] = power;
                    pilots += 1;
                }
                logs.push(StepLog {
                    episode,
                    slot,
                    follower: u,
                    state: branches[u],
                    action: Some(action),
                    reward: None,
                    pilot: transmitting[u],
                    power: probed[u][slot].map_or(0.0, |(_, p)| p),
                });
            }
            if slot + 1 < self.n_steps {
                env.advance();
            }
        }
        for _ in PROBE_ORDER.len().min(self.n_steps) + 1..self.n_steps {
            env.advance();
        }

        // Move to the best probed neighbor when it beats the stored power of
        // the current pair; conflicting moves fall back to staying.
        let mut desired = resting.clone();
        let mut scores = refs.clone();
        for u in 0..u_count {
            let mut best: Option<(BeamState, f64)> = None;
            for entry in probed[u].iter().flatten() {
                if best.map_or(true, |(_, bp)| entry.1 > bp) {
                    best = Some(*entry);
                }
            }
            if let Some((state, power)) = best {
                if power > refs[u] {
                    desired[u] = state;
                    scores[u] = power;
                }
            }
        }
        let order = descending_power_order(&scores);
        let mut claimed: Vec<usize> = Vec::with_capacity(u_count);
        for &u in &order {
            let mut pick = resting[u];
            for cand in [desired[u], resting[u]] {
                if !claimed.contains(&cand.n_f) {
                    pick = cand;
                    break;
                }
            }
            if claimed.contains(&pick.n_f) {
                for d in 1..self.n_f_max as i64 {
                    let up = Self::wrap_index(resting[u].n_f, d, self.n_f_max);
                    let down = Self::wrap_index(resting[u].n_f, -d, self.n_f_max);
                    if !claimed.contains(&up) {
                        pick = BeamState { n_f: up, n_w: resting[u].n_w };
                        break;
                    }
                    if !claimed.contains(&down) {
                        pick = BeamState { n_f: down, n_w: resting[u].n_w };
                        break;
                    }
                }
            }
            claimed.push(pick.n_f);
            self.states[u] = pick;
            self.latest_power[u] = self
                .store
                .latest(u, pick.n_f, pick.n_w)
                .map_or(0.0, |o| o.power());
        }
        let end_powers = self
            .states
            .iter()
            .enumerate()
            .map(|(u, s)| env.true_power(u, s.n_f, s.n_w))
            .collect();
        env.advance();

        EpisodeReport {
            pilots,
            end_states: self.states.clone(),
            end_powers,
            logs,
        }
    }
}

// ── Tests ───────────────────────────────────────────────────────────────────
