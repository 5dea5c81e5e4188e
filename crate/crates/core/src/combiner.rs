//! Digital combining over candidate analog beam assignments.
//!
//! The lead receives every follower through every tuned branch, so stored
//! observations double as an estimated digital-domain channel: for a joint
//! lead assignment `f` and follower beams `w`, follower `u` is seen through
//! branch `v` as `y_u(f_v, w_u)`. Candidate assignments are built from each
//! follower's strongest stored pairs, enumerated with distinct lead beams,
//! and scored by the sum of per-follower SINRs under the SINR-optimal
//! digital weights. Weight columns satisfy the unit power constraint
//! `f^H (F^H F) f = 1` by construction: substituting `f = G x` with
//! `G = (F^H F)^{-1/2}` turns the constraint into `|x| = 1` and the SINR
//! into a generalized Rayleigh quotient.

use crate::array_geometry::Codebook;
use crate::numerics::{inv_sqrt_pd, max_generalized_rayleigh, CMat, CVec, NumericsError};
use crate::qlearning::ObservationStore;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CombinerError {
    /// The exhaustive combo search is capped at 4 followers with 3
    /// candidates each.
    #[error("combo search supports at most 4 followers with 3 candidates each, got {followers} followers with up to {candidates} candidates")]
    TooManyCombos { followers: usize, candidates: usize },
    /// No enumerated combo had stored observations for every cross pair.
    #[error("no combo has a complete set of stored observations")]
    NoCompleteCombo,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

// ── Candidates and combos ───────────────────────────────────────────────────

/// Per-follower candidate beam indices, strongest first.
#[derive(Clone, Debug)]
pub struct CandidateSets {
    pub f_lists: Vec<Vec<usize>>,
    pub w_lists: Vec<Vec<usize>>,
}

/// Builds candidate lists from each follower's `k` strongest stored pairs,
/// deduplicating indices while keeping the power order.
pub fn candidate_sets(store: &ObservationStore, k: usize) -> CandidateSets {
    let mut f_lists = Vec::with_capacity(store.u_count());
    let mut w_lists = Vec::with_capacity(store.u_count());
    for u in 0..store.u_count() {
        let top = store.top_pairs(u, k);
        let mut f = Vec::new();
        let mut w = Vec::new();
        for (state, _) in top {
            if !f.contains(&state.n_f) {
                f.push(state.n_f);
            }
            if !w.contains(&state.n_w) {
                w.push(state.n_w);
            }
        }
        f_lists.push(f);
        w_lists.push(w);
    }
    CandidateSets { f_lists, w_lists }
}

/// One joint assignment: a lead beam and a follower beam per follower.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComboAssignment {
    pub f_idx: Vec<usize>,
    pub w_idx: Vec<usize>,
}

fn cartesian(lists: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(out.len() * list.len().max(1));
        for prefix in &out {
            for &x in list {
                let mut tuple = prefix.clone();
                tuple.push(x);
                next.push(tuple);
            }
        }
        out = next;
    }
    out
}

fn all_distinct(tuple: &[usize]) -> bool {
    tuple
        .iter()
        .enumerate()
        .all(|(i, x)| tuple[..i].iter().all(|y| y != x))
}

/// Enumerates joint assignments: the cartesian product of the lead lists
/// filtered to distinct lead beams, crossed with the full product of the
/// follower lists. Ordering is lexicographic in the candidate lists with
/// lead tuples outermost.
pub fn enumerate_combos(cands: &CandidateSets) -> Result<Vec<ComboAssignment>, CombinerError> {
    let followers = cands.f_lists.len();
    let candidates = cands
        .f_lists
        .iter()
        .chain(&cands.w_lists)
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    if followers > 4 || candidates > 3 {
        return Err(CombinerError::TooManyCombos {
            followers,
            candidates,
        });
    }
    let lead_tuples: Vec<Vec<usize>> = cartesian(&cands.f_lists)
        .into_iter()
        .filter(|t| all_distinct(t))
        .collect();
    let w_tuples = cartesian(&cands.w_lists);
    let mut combos = Vec::with_capacity(lead_tuples.len() * w_tuples.len());
    for f in &lead_tuples {
        for w in &w_tuples {
            combos.push(ComboAssignment {
                f_idx: f.clone(),
                w_idx: w.clone(),
            });
        }
    }
    Ok(combos)
}

// ── Effective channels and weights ──────────────────────────────────────────

/// Digital-domain channel estimate for one follower: the latest stored
/// observation through each assigned lead beam. `None` when any branch pair
/// has never been observed.
pub fn effective_channel(
    store: &ObservationStore,
    follower: usize,
    f_idx: &[usize],
    w: usize,
) -> Option<CVec> {
    let mut entries = Vec::with_capacity(f_idx.len());
    for &f in f_idx {
        entries.push(store.latest(follower, f, w)?.value);
    }
    Some(CVec::new(entries))
}

/// Gram matrix `F^H F` of the assigned lead beams.
pub fn gram_matrix(lead_book: &Codebook, f_idx: &[usize]) -> CMat {
    let cols: Vec<CVec> = f_idx.iter().map(|&f| lead_book.vector(f).clone()).collect();
    let f = CMat::from_cols(&cols);
    f.adjoint().mul(&f)
}

/// Numerator and denominator matrices of follower `u`'s SINR as a Rayleigh
/// quotient in `x = G^{-1} f`: `A = G h_u h_u^H G`,
/// `B = sum_{i != u} G h_i h_i^H G + sigma_n_sq I`.
pub fn build_ab(g_inv_sqrt: &CMat, h: &[CVec], u: usize, sigma_n_sq: f64) -> (CMat, CMat) {
    let gh: Vec<CVec> = h.iter().map(|hi| g_inv_sqrt.mul_vec(hi)).collect();
    let a = gh[u].outer(&gh[u]);
    let mut b = CMat::zeros(h.len(), h.len());
    for (i, ghi) in gh.iter().enumerate() {
        if i != u {
            b = b.add(&ghi.outer(ghi));
        }
    }
    (a, b.add_diag(sigma_n_sq))
}

/// Digital weight matrix and the estimated per-follower SINRs it achieves.
#[derive(Clone, Debug)]
pub struct DigitalWeights {
    pub f_b: CMat,
    pub approx_sinr: Vec<f64>,
}

/// SINR-optimal weights for one lead assignment: column `u` maximizes
/// follower `u`'s estimated SINR under the unit power constraint.
pub fn optimal_weights(
    gram: &CMat,
    h: &[CVec],
    sigma_n_sq: f64,
) -> Result<DigitalWeights, CombinerError> {
    assert!(sigma_n_sq > 0.0, "receive noise power must be positive");
    let g = inv_sqrt_pd(gram)?;
    optimal_weights_with_g(&g, h, sigma_n_sq)
}

fn optimal_weights_with_g(
    g: &CMat,
    h: &[CVec],
    sigma_n_sq: f64,
) -> Result<DigitalWeights, CombinerError> {
    let u_count = h.len();
    let mut cols = Vec::with_capacity(u_count);
    let mut approx_sinr = Vec::with_capacity(u_count);
    for u in 0..u_count {
        let (a, b) = build_ab(g, h, u, sigma_n_sq);
        let (x, value) = max_generalized_rayleigh(&a, &b)?;
        cols.push(g.mul_vec(&x));
        approx_sinr.push(value);
    }
    Ok(DigitalWeights {
        f_b: CMat::from_cols(&cols),
        approx_sinr,
    })
}

/// Identity weights: each follower is decoded from its own branch alone.
pub fn equal_gain_weights(u_count: usize) -> CMat {
    CMat::identity(u_count)
}

/// Estimated SINRs of arbitrary weight columns against stored channels,
/// with the noise shaped by the analog Gram matrix.
pub fn approx_sinr(f_b: &CMat, gram: &CMat, h: &[CVec], sigma_n_sq: f64) -> Vec<f64> {
    let u_count = h.len();
    (0..u_count)
        .map(|u| {
            let c = f_b.col(u);
            let signal = c.dot(&h[u]).norm_sqr();
            let mut interference = 0.0;
            for (i, hi) in h.iter().enumerate() {
                if i != u {
                    interference += c.dot(hi).norm_sqr();
                }
            }
            let noise = sigma_n_sq * c.dot(&gram.mul_vec(&c)).re;
            signal / (interference + noise)
        })
        .collect()
}

// ── Combo selection ─────────────────────────────────────────────────────────

/// The winning assignment and its weights.
#[derive(Clone, Debug)]
pub struct SelectedCombo {
    pub index: usize,
    pub weights: DigitalWeights,
}

/// Scores every combo with a complete set of stored observations by total
/// estimated SINR under optimal weights and returns the best. Ties keep the
/// earliest combo.
pub fn select_best_combo(
    combos: &[ComboAssignment],
    store: &ObservationStore,
    lead_book: &Codebook,
    sigma_n_sq: f64,
) -> Result<SelectedCombo, CombinerError> {
    let mut cached: Option<(Vec<usize>, CMat)> = None;
    let mut best: Option<(usize, DigitalWeights, f64)> = None;
    for (index, combo) in combos.iter().enumerate() {
        let h: Option<Vec<CVec>> = (0..combo.f_idx.len())
            .map(|u| effective_channel(store, u, &combo.f_idx, combo.w_idx[u]))
            .collect();
        let Some(h) = h else { continue };
        let g = match &cached {
            Some((f_idx, g)) if *f_idx == combo.f_idx => g.clone(),
            _ => {
                let g = inv_sqrt_pd(&gram_matrix(lead_book, &combo.f_idx))?;
                cached = Some((combo.f_idx.clone(), g.clone()));
                g
            }
        };
        let weights = optimal_weights_with_g(&g, &h, sigma_n_sq)?;
        let total: f64 = weights.approx_sinr.iter().sum();
        if best.as_ref().map_or(true, |(_, _, t)| total > *t) {
            best = Some((index, weights, total));
        }
    }
    best.map(|(index, weights, _)| SelectedCombo { index, weights })
        .ok_or(CombinerError::NoCompleteCombo)
}

// ── Tests ───────────────────────────────────────────────────────────────────
