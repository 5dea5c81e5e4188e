//! Tabular Q-learning beam tracking over codebook index pairs.
//!
//! Each follower runs an independent Q table over states `(n_f, n_w)`, the
//! 1-based lead and follower codebook indices, with four circular actions.
//! An episode spans `n_steps` time slots: the first slot re-measures the
//! episode's starting state, and each later slot takes one masked
//! epsilon-greedy action scored by the measured power ratio against the
//! previous slot. Two followers never share a lead beam; actions that would
//! collide are masked out, with followers deciding in descending order of
//! their latest observed power. At the end of each episode the strongest
//! pair among that episode's slot powers takes over as `s_mp` and seeds the
//! next tracking episode, so the anchor is always at most one episode old.
//!
//! In `Online` mode every slot transmits a pilot. In `OnlineOffline` mode a
//! slot whose landing state already has a stored observation reuses it
//! instead of transmitting, which is where the pilot-overhead reduction
//! comes from; the first slot of an episode always transmits so the reused
//! table never goes completely stale.

use crate::channel::{Observation, SimEnv};
use rand::Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrackError {
    /// Every action of a follower is masked by lead-beam collisions.
    #[error("follower {follower} has no legal action")]
    AllActionsMasked { follower: usize },
}

// ── States and actions ──────────────────────────────────────────────────────

/// Beam pair: 1-based lead index `n_f` and follower index `n_w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeamState {
    pub n_f: usize,
    pub n_w: usize,
}

/// One-step move on the index lattice. `Up`/`Down` shift the follower beam,
/// `Right`/`Left` shift the lead beam; both axes are circular.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Right,
    Left,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Right, Action::Left];

    fn index(self) -> usize {
        match self {
            Action::Up => 0,
            Action::Down => 1,
            Action::Right => 2,
            Action::Left => 3,
        }
    }
}

/// Circular 1-based increment.
fn wrap_index(index: usize, delta: i64, max: usize) -> usize {
    let m = max as i64;
    let shifted = (index as i64 - 1 + delta).rem_euclid(m);
    (shifted + 1) as usize
}

impl BeamState {
    pub fn apply(&self, action: Action, n_f_max: usize, n_w_max: usize) -> BeamState {
        match action {
            Action::Up => BeamState {
                n_f: self.n_f,
                n_w: wrap_index(self.n_w, 1, n_w_max),
            },
            Action::Down => BeamState {
                n_f: self.n_f,
                n_w: wrap_index(self.n_w, -1, n_w_max),
            },
            Action::Right => BeamState {
                n_f: wrap_index(self.n_f, 1, n_f_max),
                n_w: self.n_w,
            },
            Action::Left => BeamState {
                n_f: wrap_index(self.n_f, -1, n_f_max),
                n_w: self.n_w,
            },
        }
    }
}

// ── Rewards and Q table ─────────────────────────────────────────────────────

/// Power-ratio thresholds: ratios above `upper` reward +1, below `lower`
/// reward -1, in between 0.
#[derive(Clone, Copy, Debug)]
pub struct RewardThresholds {
    pub upper: f64,
    pub lower: f64,
}

impl RewardThresholds {
    pub fn new(upper: f64, lower: f64) -> Self {
        assert!(
            upper >= 1.0 && lower <= 1.0 && lower > 0.0,
            "thresholds must satisfy upper >= 1 >= lower > 0"
        );
        RewardThresholds { upper, lower }
    }
}

impl Default for RewardThresholds {
    fn default() -> Self {
        RewardThresholds::new(1.1, 0.9)
    }
}

/// Ternary reward from the power ratio `new_power / prev_power`.
///
/// A vanishing previous power means any nonzero new power is an improvement,
/// so the function stays total: +1 if `new_power` is positive, else 0.
pub fn reward(prev_power: f64, new_power: f64, thresholds: &RewardThresholds) -> f64 {
    if prev_power <= f64::MIN_POSITIVE {
        return if new_power > 0.0 { 1.0 } else { 0.0 };
    }
    let ratio = new_power / prev_power;
    if ratio > thresholds.upper {
        1.0
    } else if ratio < thresholds.lower {
        -1.0
    } else {
        0.0
    }
}

/// Q-learning step size, discount, and exploration rate.
#[derive(Clone, Copy, Debug)]
pub struct LearnParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            alpha: 0.5,
            gamma: 0.5,
            epsilon: 0.1,
        }
    }
}

/// Dense action-value table over the full index lattice, zero initialized.
#[derive(Clone, Debug)]
pub struct QTable {
    n_f_max: usize,
    n_w_max: usize,
    values: Vec<[f64; 4]>,
}

impl QTable {
    pub fn new(n_f_max: usize, n_w_max: usize) -> Self {
        assert!(n_f_max >= 1 && n_w_max >= 1);
        QTable {
            n_f_max,
            n_w_max,
            values: vec![[0.0; 4]; n_f_max * n_w_max],
        }
    }

    pub fn n_f_max(&self) -> usize {
        self.n_f_max
    }

    pub fn n_w_max(&self) -> usize {
        self.n_w_max
    }

    fn flat(&self, state: BeamState) -> usize {
        assert!(state.n_f >= 1 && state.n_f <= self.n_f_max);
        assert!(state.n_w >= 1 && state.n_w <= self.n_w_max);
        (state.n_f - 1) * self.n_w_max + (state.n_w - 1)
    }

    pub fn get(&self, state: BeamState, action: Action) -> f64 {
        self.values[self.flat(state)][action.index()]
    }

    pub fn max_value(&self, state: BeamState) -> f64 {
        let row = &self.values[self.flat(state)];
        row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `q <- (1 - alpha) q + alpha (r + gamma max_a' q(next, a'))`.
    pub fn update(
        &mut self,
        state: BeamState,
        action: Action,
        reward: f64,
        next: BeamState,
        params: &LearnParams,
    ) {
        let target = reward + params.gamma * self.max_value(next);
        let idx = self.flat(state);
        let slot = &mut self.values[idx][action.index()];
        *slot = (1.0 - params.alpha) * *slot + params.alpha * target;
    }
}

/// Masked epsilon-greedy action choice.
///
/// Consumes exactly two RNG values per call (one exploration coin, one
/// selection index) so decision streams stay aligned across configurations.
/// Greedy ties are broken uniformly among the maximizers.
pub fn epsilon_greedy<R: Rng>(
    q: &QTable,
    state: BeamState,
    masked: &[Action],
    epsilon: f64,
    follower: usize,
    rng: &mut R,
) -> Result<Action, TrackError> {
    let legal: Vec<Action> = Action::ALL
        .iter()
        .copied()
        .filter(|a| !masked.contains(a))
        .collect();
    if legal.is_empty() {
        return Err(TrackError::AllActionsMasked { follower });
    }
    let coin: f64 = rng.gen();
    let pick: u64 = rng.gen();
    if coin < epsilon {
        return Ok(legal[(pick % legal.len() as u64) as usize]);
    }
    let best = legal
        .iter()
        .map(|&a| q.get(state, a))
        .fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<Action> = legal.into_iter().filter(|&a| q.get(state, a) == best).collect();
    Ok(ties[(pick % ties.len() as u64) as usize])
}

// ── Observation store ───────────────────────────────────────────────────────

/// Per-follower map from beam pair to the latest observation, plus a full
/// history log. Keys are ordered so scans are deterministic.
#[derive(Clone, Debug, Default)]
pub struct ObservationStore {
    latest: Vec<BTreeMap<(usize, usize), Observation>>,
    history: Vec<Observation>,
}

impl ObservationStore {
    pub fn new(u_count: usize) -> Self {
        ObservationStore {
            latest: vec![BTreeMap::new(); u_count],
            history: Vec::new(),
        }
    }

    pub fn u_count(&self) -> usize {
        self.latest.len()
    }

    pub fn record(&mut self, obs: Observation) {
        self.latest[obs.follower].insert((obs.n_f, obs.n_w), obs);
        self.history.push(obs);
    }

    pub fn latest(&self, follower: usize, n_f: usize, n_w: usize) -> Option<&Observation> {
        self.latest[follower].get(&(n_f, n_w))
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    /// The `k` strongest stored pairs, descending power, ties to smaller
    /// indices. Returns fewer when the store holds fewer pairs.
    pub fn top_pairs(&self, follower: usize, k: usize) -> Vec<(BeamState, f64)> {
        let mut pairs: Vec<(BeamState, f64)> = self.latest[follower]
            .iter()
            .map(|(&(n_f, n_w), obs)| (BeamState { n_f, n_w }, obs.power()))
            .collect();
        pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        pairs.truncate(k);
        pairs
    }
}

// ── Scheduling helpers ──────────────────────────────────────────────────────

/// Starting states for the initial search: an `m_f x m_w` sub-lattice with
/// `m_f * m_w == n_episodes`, factored to maximize the smaller axis count
/// (ties prefer the more balanced split, then the smaller lead count), with
/// per-axis points `1 + floor(i * max / m)`. Episodes walk the lattice in
/// lead-major order. When no factorization fits the axis sizes, the smallest
/// covering lattice is truncated.
pub fn initial_search_schedule(
    n_f_max: usize,
    n_w_max: usize,
    n_episodes: usize,
) -> Vec<BeamState> {
    assert!(n_episodes >= 1);
    assert!(
        n_episodes <= n_f_max * n_w_max,
        "more initial episodes than lattice points"
    );
    let mut best: Option<(usize, usize)> = None;
    for m_f in 1..=n_f_max.min(n_episodes) {
        let m_w = (n_episodes + m_f - 1) / m_f;
        if m_w > n_w_max {
            continue;
        }
        let cand = (m_f, m_w);
        let rank = |(f, w): (usize, usize)| {
            let product = f * w;
            let balance = f.min(w);
            let spread = (f as i64 - w as i64).abs();
            (product, usize::MAX - balance, spread, f)
        };
        if best.map_or(true, |b| rank(cand) < rank(b)) {
            best = Some(cand);
        }
    }
    let (m_f, m_w) = best.expect("a covering lattice always exists");
    let f_points = axis_points(n_f_max, m_f);
    let w_points = axis_points(n_w_max, m_w);
    let mut schedule = Vec::with_capacity(n_episodes);
    'fill: for &n_f in &f_points {
        for &n_w in &w_points {
            schedule.push(BeamState { n_f, n_w });
            if schedule.len() == n_episodes {
                break 'fill;
            }
        }
    }
    schedule
}

fn axis_points(max: usize, count: usize) -> Vec<usize> {
    (0..count).map(|i| 1 + i * max / count).collect()
}

/// Resolves lead-beam claims in `order`: a follower whose desired `n_f` is
/// taken shifts to the nearest free index, trying +1, -1, +2, -2, ...
pub fn de_conflict(desired: &[BeamState], order: &[usize], n_f_max: usize) -> Vec<BeamState> {
    let mut out = desired.to_vec();
    let mut claimed: Vec<usize> = Vec::with_capacity(desired.len());
    for &u in order {
        let want = desired[u].n_f;
        let mut pick = want;
        if claimed.contains(&want) {
            'search: for d in 1..n_f_max as i64 {
                for cand in [wrap_index(want, d, n_f_max), wrap_index(want, -d, n_f_max)] {
                    if !claimed.contains(&cand) {
                        pick = cand;
                        break 'search;
                    }
                }
            }
        }
        claimed.push(pick);
        out[u] = BeamState {
            n_f: pick,
            n_w: desired[u].n_w,
        };
    }
    out
}

/// Follower indices sorted by descending power, ties by index.
pub fn descending_power_order(powers: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..powers.len()).collect();
    order.sort_by(|&a, &b| powers[b].partial_cmp(&powers[a]).unwrap().then(a.cmp(&b)));
    order
}

/// One pilot slot: every transmitting follower's signal is received through
/// all currently tuned lead branches, so a single transmission records one
/// observation per branch.
pub(crate) fn measure_slot(
    env: &mut SimEnv,
    branches: &[BeamState],
    transmitting: &[bool],
) -> Vec<Observation> {
    let mut out = Vec::new();
    for u in 0..branches.len() {
        if !transmitting[u] {
            continue;
        }
        for branch in branches {
            out.push(env.measure(u, branch.n_f, branches[u].n_w));
        }
    }
    out
}

// ── Tracker ─────────────────────────────────────────────────────────────────

/// Pilot policy: transmit every slot, or reuse stored observations when the
/// landing state already has one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Online,
    OnlineOffline,
}

/// One slot of one follower, for trace output and tests.
#[derive(Clone, Copy, Debug)]
pub struct StepLog {
    pub episode: usize,
    pub slot: usize,
    pub follower: usize,
    pub state: BeamState,
    pub action: Option<Action>,
    pub reward: Option<f64>,
    pub pilot: bool,
    pub power: f64,
}

/// Per-episode outcome: pilot transmissions, the states occupied at the
/// final slot with their true coupling powers (evaluated on the channel of
/// the final slot, before the walks advance), and per-slot traces.
#[derive(Clone, Debug)]
pub struct EpisodeReport {
    pub pilots: usize,
    pub end_states: Vec<BeamState>,
    pub end_powers: Vec<f64>,
    pub logs: Vec<StepLog>,
}

#[derive(Clone, Debug)]
struct FollowerState {
    q: QTable,
    state: BeamState,
    s_mp: Option<BeamState>,
    s_mp_power: f64,
    latest_power: f64,
    last_power: f64,
}

/// Multi-follower Q-learning tracker.
pub struct QLearningTracker<R: Rng> {
    followers: Vec<FollowerState>,
    store: ObservationStore,
    params: LearnParams,
    thresholds: RewardThresholds,
    mode: Mode,
    n_steps: usize,
    n_f_max: usize,
    n_w_max: usize,
    schedule: Vec<BeamState>,
    schedule_offsets: Vec<usize>,
    policy_rng: R,
}

impl<R: Rng> QLearningTracker<R> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        u_count: usize,
        n_f_max: usize,
        n_w_max: usize,
        n_initial_episodes: usize,
        n_steps: usize,
        params: LearnParams,
        thresholds: RewardThresholds,
        mode: Mode,
        policy_rng: R,
    ) -> Self {
        assert!(u_count >= 1 && u_count <= n_f_max, "followers must fit distinct lead beams");
        assert!(n_steps >= 1);
        let spacing = n_f_max / u_count;
        let followers = (0..u_count)
            .map(|_| FollowerState {
                q: QTable::new(n_f_max, n_w_max),
                state: BeamState { n_f: 1, n_w: 1 },
                s_mp: None,
                s_mp_power: f64::NEG_INFINITY,
                latest_power: 0.0,
                last_power: 0.0,
            })
            .collect();
        QLearningTracker {
            followers,
            store: ObservationStore::new(u_count),
            params,
            thresholds,
            mode,
            n_steps,
            n_f_max,
            n_w_max,
            schedule: initial_search_schedule(n_f_max, n_w_max, n_initial_episodes),
            schedule_offsets: (0..u_count).map(|u| u * spacing).collect(),
            policy_rng,
        }
    }

    pub fn store(&self) -> &ObservationStore {
        &self.store
    }

    pub fn q_table(&self, follower: usize) -> &QTable {
        &self.followers[follower].q
    }

    pub fn states(&self) -> Vec<BeamState> {
        self.followers.iter().map(|f| f.state).collect()
    }

    pub fn s_mp(&self, follower: usize) -> Option<BeamState> {
        self.followers[follower].s_mp
    }

    fn latest_powers(&self) -> Vec<f64> {
        self.followers.iter().map(|f| f.latest_power).collect()
    }

    /// Feeds an out-of-band pilot observation into the store and the
    /// strongest-pair bookkeeping, as if the tracker had measured it itself.
    pub fn record_observation(&mut self, obs: Observation) {
        self.note_observation(obs);
    }

    /// Records an observation and maintains the per-follower strongest pair:
    /// re-measuring the current strongest pair tracks its power up or down,
    /// and any other measurement that beats the tracked power takes over.
    /// Only fresh pilots move the anchor here; reused slot values compete at
    /// the end of the episode instead.
    fn note_observation(&mut self, obs: Observation) {
        let u = obs.follower;
        let state = BeamState {
            n_f: obs.n_f,
            n_w: obs.n_w,
        };
        let p = obs.power();
        self.store.record(obs);
        let fs = &mut self.followers[u];
        match fs.s_mp {
            None => {
                fs.s_mp = Some(state);
                fs.s_mp_power = p;
            }
            Some(current) if current == state => {
                fs.s_mp_power = p;
            }
            Some(_) if p > fs.s_mp_power => {
                fs.s_mp = Some(state);
                fs.s_mp_power = p;
            }
            _ => {}
        }
    }

    /// Moves the strongest-pair anchor to the best power logged in the
    /// episode that just ended, if it beats the anchor's own tracked power.
    /// Reused slot values count here, so the anchor can follow the tracker
    /// in reuse mode, while every move is re-measured fresh at the start of
    /// the next episode and decays honestly via `note_observation`.
    fn settle_episode_anchor(&mut self, u: usize, best: Option<(BeamState, f64)>) {
        if let Some((state, p)) = best {
            let fs = &mut self.followers[u];
            if fs.s_mp.is_none() || p > fs.s_mp_power {
                fs.s_mp = Some(state);
                fs.s_mp_power = p;
            }
        }
    }

    /// Starting states for initial-search episode `episode`: the scheduled
    /// lattice point, shifted per follower so the search zones are staggered
    /// across the lead codebook.
    fn initial_starts(&self, episode: usize) -> Vec<BeamState> {
        let point = self.schedule[episode];
        let desired: Vec<BeamState> = self
            .schedule_offsets
            .iter()
            .map(|&off| BeamState {
                n_f: wrap_index(point.n_f, off as i64, self.n_f_max),
                n_w: point.n_w,
            })
            .collect();
        let order: Vec<usize> = (0..desired.len()).collect();
        de_conflict(&desired, &order, self.n_f_max)
    }

    /// Starting states for a tracking episode: each follower's strongest
    /// known pair, with lead-beam claims resolved in descending power order.
    fn tracking_starts(&self) -> Vec<BeamState> {
        let desired: Vec<BeamState> = self
            .followers
            .iter()
            .map(|f| f.s_mp.unwrap_or(f.state))
            .collect();
        let order = descending_power_order(&self.latest_powers());
        de_conflict(&desired, &order, self.n_f_max)
    }

    /// Initial-search episodes always transmit: their whole point is to
    /// build the observation map, so there is nothing worth reusing yet.
    pub fn run_initial_episode(&mut self, env: &mut SimEnv, episode: usize) -> EpisodeReport {
        let starts = self.initial_starts(episode);
        self.run_episode(env, episode, starts, false)
    }

    pub fn run_tracking_episode(&mut self, env: &mut SimEnv, episode: usize) -> EpisodeReport {
        let starts = self.tracking_starts();
        let reuse = self.mode == Mode::OnlineOffline;
        self.run_episode(env, episode, starts, reuse)
    }

    fn run_episode(
        &mut self,
        env: &mut SimEnv,
        episode: usize,
        starts: Vec<BeamState>,
        reuse: bool,
    ) -> EpisodeReport {
        let u_count = self.followers.len();
        debug_assert_eq!(u_count, env.u_count());
        let mut logs = Vec::with_capacity(u_count * self.n_steps);
        let mut pilots = 0;
        let mut end_powers = Vec::new();
        let mut episode_best: Vec<Option<(BeamState, f64)>> = vec![None; u_count];

        // Slot 0: jump to the starting states and refresh them with pilots.
        for (u, fs) in self.followers.iter_mut().enumerate() {
            fs.state = starts[u];
        }
        let all = vec![true; u_count];
        for obs in measure_slot(env, &starts, &all) {
            self.note_observation(obs);
        }
        pilots += u_count;
        for u in 0..u_count {
            let fs = &self.followers[u];
            let power = self
                .store
                .latest(u, fs.state.n_f, fs.state.n_w)
                .expect("starting state was just measured")
                .power();
            logs.push(StepLog {
                episode,
                slot: 0,
                follower: u,
                state: fs.state,
                action: None,
                reward: None,
                pilot: true,
                power,
            });
            episode_best[u] = Some((fs.state, power));
            let fs = &mut self.followers[u];
            fs.latest_power = power;
            fs.last_power = power;
        }
        if self.n_steps == 1 {
            end_powers = self.true_end_powers(env);
        }
        env.advance();

        for slot in 1..self.n_steps {
            // Decide in descending power order, masking lead-beam claims.
            let order = descending_power_order(&self.latest_powers());
            let mut claims: Vec<usize> = self.followers.iter().map(|f| f.state.n_f).collect();
            let mut prev_states = vec![BeamState { n_f: 1, n_w: 1 }; u_count];
            let mut chosen = vec![Action::Up; u_count];
            for &u in &order {
                let state = self.followers[u].state;
                let masked: Vec<Action> = Action::ALL
                    .iter()
                    .copied()
                    .filter(|&a| {
                        let target = state.apply(a, self.n_f_max, self.n_w_max);
                        claims
                            .iter()
                            .enumerate()
                            .any(|(v, &n_f)| v != u && n_f == target.n_f)
                    })
                    .collect();
                let action = epsilon_greedy(
                    &self.followers[u].q,
                    state,
                    &masked,
                    self.params.epsilon,
                    u,
                    &mut self.policy_rng,
                )
                .expect("distinct lead assignments leave the follower axis open");
                prev_states[u] = state;
                let next = state.apply(action, self.n_f_max, self.n_w_max);
                self.followers[u].state = next;
                claims[u] = next.n_f;
                chosen[u] = action;
            }

            // Observe the landing states, reusing stored values when allowed.
            let states: Vec<BeamState> = self.followers.iter().map(|f| f.state).collect();
            let transmitting: Vec<bool> = (0..u_count)
                .map(|u| {
                    !reuse
                        || self
                            .store
                            .latest(u, states[u].n_f, states[u].n_w)
                            .is_none()
                })
                .collect();
            for obs in measure_slot(env, &states, &transmitting) {
                self.note_observation(obs);
            }
            pilots += transmitting.iter().filter(|&&t| t).count();

            for u in 0..u_count {
                let power = self
                    .store
                    .latest(u, states[u].n_f, states[u].n_w)
                    .expect("landing state is measured or stored")
                    .power();
                let r = reward(self.followers[u].last_power, power, &self.thresholds);
                let params = self.params;
                self.followers[u]
                    .q
                    .update(prev_states[u], chosen[u], r, states[u], &params);
                let fs = &mut self.followers[u];
                fs.last_power = power;
                fs.latest_power = power;
                if episode_best[u].map_or(true, |(_, best)| power > best) {
                    episode_best[u] = Some((states[u], power));
                }
                logs.push(StepLog {
                    episode,
                    slot,
                    follower: u,
                    state: states[u],
                    action: Some(chosen[u]),
                    reward: Some(r),
                    pilot: transmitting[u],
                    power,
                });
            }
            if slot + 1 == self.n_steps {
                end_powers = self.true_end_powers(env);
            }
            env.advance();
        }

        for u in 0..u_count {
            self.settle_episode_anchor(u, episode_best[u]);
        }

        EpisodeReport {
            pilots,
            end_states: self.followers.iter().map(|f| f.state).collect(),
            end_powers,
            logs,
        }
    }

    fn true_end_powers(&self, env: &SimEnv) -> Vec<f64> {
        self.followers
            .iter()
            .enumerate()
            .map(|(u, f)| env.true_power(u, f.state.n_f, f.state.n_w))
            .collect()
    }
}

// ── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_geometry::{build_codebook, uniform_azimuths_deg, ArrayShape};
    use crate::channel::{AngleWalk, LinkChannel, NoiseModel};
    use crate::numerics::C64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape() -> ArrayShape {
        ArrayShape { nx: 4, ny: 4 }
    }

    fn static_walk(aoa_az: f64, aod_az: f64, elev: f64) -> AngleWalk {
        AngleWalk {
            aoa_azimuth_rad: aoa_az.to_radians(),
            aoa_elevation_rad: elev.to_radians(),
            aod_azimuth_rad: aod_az.to_radians(),
            aod_elevation_rad: elev.to_radians(),
            sigma_lambda_sq: 0.0,
            aoa_elevation_bounds_rad: (0.0, 30f64.to_radians()),
            aod_elevation_bounds_rad: (0.0, 30f64.to_radians()),
        }
    }

    fn test_env(aoa_azimuths: &[f64], noise: f64) -> SimEnv {
        let lead_book =
            build_codebook(&uniform_azimuths_deg(12), &[15.0], shape()).unwrap();
        let follower_book =
            build_codebook(&uniform_azimuths_deg(12), &[15.0, 45.0, 75.0], shape()).unwrap();
        let links = aoa_azimuths
            .iter()
            .map(|&az| LinkChannel {
                rho: C64::new(1.0, 0.0),
                walk: static_walk(az, 105.0, 15.0),
            })
            .collect();
        SimEnv::new(
            links,
            lead_book,
            follower_book,
            NoiseModel {
                sigma_z_sq: noise,
                sigma_n_sq: noise.max(1e-12),
            },
            ChaCha8Rng::seed_from_u64(11),
            ChaCha8Rng::seed_from_u64(13),
        )
    }

    fn tracker(u_count: usize, mode: Mode, seed: u64) -> QLearningTracker<ChaCha8Rng> {
        QLearningTracker::new(
            u_count,
            12,
            36,
            30,
            4,
            LearnParams::default(),
            RewardThresholds::default(),
            mode,
            ChaCha8Rng::seed_from_u64(seed),
        )
    }

    const TOL: f64 = 1e-12;

    // 1. Actions move one step and wrap on both axes.
    #[test]
    fn actions_wrap_circularly() {
        let s = BeamState { n_f: 1, n_w: 36 };
        assert_eq!(s.apply(Action::Left, 12, 36), BeamState { n_f: 12, n_w: 36 });
        assert_eq!(s.apply(Action::Up, 12, 36), BeamState { n_f: 1, n_w: 1 });
        let t = BeamState { n_f: 12, n_w: 1 };
        assert_eq!(t.apply(Action::Right, 12, 36), BeamState { n_f: 1, n_w: 1 });
        assert_eq!(t.apply(Action::Down, 12, 36), BeamState { n_f: 12, n_w: 36 });
    }

    // 2. Reward thresholds split the ratio axis into +1 / 0 / -1.
    #[test]
    fn reward_thresholds() {
        let th = RewardThresholds::default();
        assert_eq!(reward(1.0, 1.2, &th), 1.0);
        assert_eq!(reward(1.0, 1.0, &th), 0.0);
        assert_eq!(reward(1.0, 0.8, &th), -1.0);
        assert_eq!(reward(1.0, 1.1, &th), 0.0);
        assert_eq!(reward(0.0, 0.5, &th), 1.0);
        assert_eq!(reward(0.0, 0.0, &th), 0.0);
    }

    // 3. Hand-computed Q updates.
    #[test]
    fn q_update_matches_hand_calc() {
        let mut q = QTable::new(3, 3);
        let params = LearnParams {
            alpha: 0.5,
            gamma: 0.5,
            epsilon: 0.0,
        };
        let s = BeamState { n_f: 2, n_w: 2 };
        let next = BeamState { n_f: 2, n_w: 3 };
        q.update(s, Action::Up, 1.0, next, &params);
        assert!((q.get(s, Action::Up) - 0.5).abs() < TOL);
        q.update(next, Action::Down, 1.0, s, &params);
        assert!((q.get(next, Action::Down) - 0.625).abs() < TOL);
    }

    // 4. epsilon_greedy consumes exactly two RNG values.
    #[test]
    fn epsilon_greedy_consumes_two_draws() {
        let q = QTable::new(4, 4);
        let s = BeamState { n_f: 2, n_w: 2 };
        let mut used = ChaCha8Rng::seed_from_u64(7);
        epsilon_greedy(&q, s, &[], 0.1, 0, &mut used).unwrap();
        let probe: u64 = used.gen();
        let mut manual = ChaCha8Rng::seed_from_u64(7);
        let _: f64 = manual.gen();
        let _: u64 = manual.gen();
        let expect: u64 = manual.gen();
        assert_eq!(probe, expect);
    }

    // 5. Masking is sound for every subset of actions.
    #[test]
    fn masking_soundness_exhaustive() {
        let q = QTable::new(4, 4);
        let s = BeamState { n_f: 2, n_w: 2 };
        for bits in 0u8..16 {
            let masked: Vec<Action> = Action::ALL
                .iter()
                .copied()
                .enumerate()
                .filter(|(i, _)| bits & (1 << i) != 0)
                .map(|(_, a)| a)
                .collect();
            for seed in 0..50 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let got = epsilon_greedy(&q, s, &masked, 0.5, 3, &mut rng);
                if masked.len() == 4 {
                    assert_eq!(got, Err(TrackError::AllActionsMasked { follower: 3 }));
                } else {
                    assert!(!masked.contains(&got.unwrap()));
                }
            }
        }
    }

    // 6. Greedy choice picks the planted argmax.
    #[test]
    fn greedy_picks_argmax() {
        let mut q = QTable::new(4, 4);
        let s = BeamState { n_f: 3, n_w: 1 };
        q.update(
            s,
            Action::Left,
            10.0,
            s,
            &LearnParams {
                alpha: 1.0,
                gamma: 0.0,
                epsilon: 0.0,
            },
        );
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let got = epsilon_greedy(&q, s, &[], 0.0, 0, &mut rng).unwrap();
            assert_eq!(got, Action::Left);
        }
    }

    // 7. Pure exploration is roughly uniform over legal actions.
    #[test]
    fn exploration_is_uniform() {
        let q = QTable::new(4, 4);
        let s = BeamState { n_f: 2, n_w: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            let a = epsilon_greedy(&q, s, &[Action::Left], 1.0, 0, &mut rng).unwrap();
            counts[a.index()] += 1;
        }
        assert_eq!(counts[Action::Left.index()], 0);
        for &c in &counts[..3] {
            assert!((c as i64 - 1333).abs() < 200, "count {c} far from uniform");
        }
    }

    // 8. The 30-episode schedule on a 12 x 36 lattice is the 5 x 6 grid.
    #[test]
    fn schedule_30_episodes() {
        let sched = initial_search_schedule(12, 36, 30);
        assert_eq!(sched.len(), 30);
        let f: Vec<usize> = sched.iter().map(|s| s.n_f).collect();
        let w: Vec<usize> = sched.iter().map(|s| s.n_w).collect();
        let mut f_unique = f.clone();
        f_unique.dedup();
        assert_eq!(f_unique, vec![1, 3, 5, 8, 10]);
        assert_eq!(&w[..6], &[1, 7, 13, 19, 25, 31]);
        assert_eq!(sched[0], BeamState { n_f: 1, n_w: 1 });
        assert_eq!(sched[6], BeamState { n_f: 3, n_w: 1 });
    }

    // 9. Four episodes on a 6 x 6 lattice probe the 2 x 2 corners grid.
    #[test]
    fn schedule_4_episodes() {
        let sched = initial_search_schedule(6, 6, 4);
        let expect = [(1, 1), (1, 4), (4, 1), (4, 4)];
        let got: Vec<(usize, usize)> = sched.iter().map(|s| (s.n_f, s.n_w)).collect();
        assert_eq!(got, expect);
    }

    // 10. Claim resolution shifts to the nearest free lead index, +1 first.
    #[test]
    fn de_conflict_nearest_free() {
        let desired = vec![
            BeamState { n_f: 5, n_w: 2 },
            BeamState { n_f: 5, n_w: 9 },
            BeamState { n_f: 5, n_w: 20 },
        ];
        let got = de_conflict(&desired, &[0, 1, 2], 12);
        assert_eq!(got[0], BeamState { n_f: 5, n_w: 2 });
        assert_eq!(got[1], BeamState { n_f: 6, n_w: 9 });
        assert_eq!(got[2], BeamState { n_f: 4, n_w: 20 });
    }

    // 11. The strongest-state pointer decays with its own refreshes, so a
    // later weaker measurement elsewhere can take over honestly.
    #[test]
    fn s_mp_decays_on_refresh_drop() {
        let mut t = tracker(1, Mode::Online, 1);
        let mk = |n_f: usize, n_w: usize, amp: f64, time: u64| Observation {
            follower: 0,
            time,
            n_f,
            n_w,
            value: C64::new(amp, 0.0),
        };
        t.note_observation(mk(3, 3, 2.0, 0));
        t.note_observation(mk(4, 4, 1.5, 1));
        assert_eq!(t.s_mp(0), Some(BeamState { n_f: 3, n_w: 3 }));
        t.note_observation(mk(3, 3, 1.0, 2));
        assert_eq!(t.s_mp(0), Some(BeamState { n_f: 3, n_w: 3 }));
        assert!((t.followers[0].s_mp_power - 1.0).abs() < TOL);
        t.note_observation(mk(4, 4, 1.1, 3));
        assert_eq!(t.s_mp(0), Some(BeamState { n_f: 4, n_w: 4 }));
        assert!((t.followers[0].s_mp_power - 1.21).abs() < TOL);
    }

    // 12. Noiseless static single link: the tracker finds and keeps a state
    // at least as strong as the best scheduled probe.
    #[test]
    fn single_link_converges_on_static_channel() {
        let mut env = test_env(&[75.0], 0.0);
        let mut t = tracker(1, Mode::Online, 5);
        let sched = initial_search_schedule(12, 36, 30);
        let sched_best = sched
            .iter()
            .map(|s| env.true_power(0, s.n_f, s.n_w))
            .fold(f64::NEG_INFINITY, f64::max);
        for e in 0..30 {
            t.run_initial_episode(&mut env, e);
        }
        for e in 30..80 {
            t.run_tracking_episode(&mut env, e);
        }
        let s = t.s_mp(0).unwrap();
        let p = env.true_power(0, s.n_f, s.n_w);
        assert!(p >= sched_best - TOL, "s_mp power {p} below schedule best {sched_best}");
    }

    // 13. Lead assignments stay distinct at every logged slot.
    #[test]
    fn lead_beams_never_collide() {
        let mut env = test_env(&[20.0, 100.0, 250.0], 1e-3);
        let mut t = tracker(3, Mode::OnlineOffline, 9);
        let mut all_logs = Vec::new();
        for e in 0..30 {
            all_logs.extend(t.run_initial_episode(&mut env, e).logs);
        }
        for e in 30..130 {
            all_logs.extend(t.run_tracking_episode(&mut env, e).logs);
        }
        let mut by_slot: std::collections::HashMap<(usize, usize), Vec<usize>> =
            std::collections::HashMap::new();
        for log in &all_logs {
            by_slot
                .entry((log.episode, log.slot))
                .or_default()
                .push(log.state.n_f);
        }
        for ((episode, slot), leads) in by_slot {
            let mut sorted = leads.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(
                sorted.len(),
                leads.len(),
                "lead collision at episode {episode} slot {slot}"
            );
        }
    }

    // 14. Online and online/offline agree exactly on a static noiseless
    // channel: same Q tables, same end states.
    #[test]
    fn modes_agree_when_noiseless_and_static() {
        let run = |mode: Mode| {
            let mut env = test_env(&[20.0, 100.0, 250.0], 0.0);
            let mut t = tracker(3, mode, 21);
            for e in 0..30 {
                t.run_initial_episode(&mut env, e);
            }
            for e in 30..90 {
                t.run_tracking_episode(&mut env, e);
            }
            t
        };
        let online = run(Mode::Online);
        let offline = run(Mode::OnlineOffline);
        assert_eq!(online.states(), offline.states());
        for u in 0..3 {
            assert_eq!(online.followers[u].q.values, offline.followers[u].q.values);
        }
    }

    // 15. Online/offline tracking reuses pilots: per-episode transmissions
    // stay within [U, 4U], so the reduction never exceeds 75%.
    #[test]
    fn pilot_reuse_bounds() {
        let mut env = test_env(&[20.0, 100.0, 250.0], 1e-3);
        let mut t = tracker(3, Mode::OnlineOffline, 33);
        for e in 0..30 {
            t.run_initial_episode(&mut env, e);
        }
        let mut total = 0;
        for e in 30..230 {
            let report = t.run_tracking_episode(&mut env, e);
            assert!(report.pilots >= 3 && report.pilots <= 12);
            total += report.pilots;
        }
        let reduction = 1.0 - total as f64 / (3.0 * 4.0 * 200.0);
        assert!(reduction <= 0.75 + TOL);
        assert!(reduction > 0.0, "reuse should save some pilots");
    }

    proptest! {
        // 16. Rewards are total and monotone in the new power.
        #[test]
        fn reward_total_and_monotone(prev in 0f64..10.0, a in 0f64..10.0, b in 0f64..10.0) {
            let th = RewardThresholds::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let r_lo = reward(prev, lo, &th);
            let r_hi = reward(prev, hi, &th);
            prop_assert!([-1.0, 0.0, 1.0].contains(&r_lo));
            prop_assert!([-1.0, 0.0, 1.0].contains(&r_hi));
            prop_assert!(r_lo <= r_hi);
        }

        // 17. Applying any action then its inverse returns to the start.
        #[test]
        fn actions_invert(n_f in 1usize..=12, n_w in 1usize..=36) {
            let s = BeamState { n_f, n_w };
            let pairs = [
                (Action::Up, Action::Down),
                (Action::Right, Action::Left),
            ];
            for (fwd, back) in pairs {
                let there = s.apply(fwd, 12, 36);
                prop_assert_eq!(there.apply(back, 12, 36), s);
            }
        }
    }
}
