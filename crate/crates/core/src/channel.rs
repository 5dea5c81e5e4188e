//! Line-of-sight link channels with random-walk angles and pilot observations.
//!
//! Each follower-to-lead link is rank one: a complex gain `rho` times the
//! outer product of the arrival-side and departure-side array responses. The
//! four angles (azimuth and elevation on both sides) drift as independent
//! Gaussian random walks; azimuths wrap around the circle while elevations
//! reflect off configurable bounds. Pilot observations couple a lead beam and
//! a follower beam through the channel plus circular complex noise.

use crate::array_geometry::{array_response, wrap_azimuth, ArrayShape, SteeringAngles};
use crate::numerics::{C64, CMat, CVec};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    /// A digital weight column does not satisfy `f^H F^H F f = 1`.
    #[error("digital weight column {column} violates the unit power constraint by {defect}")]
    PowerConstraintViolated { column: usize, defect: f64 },
}

/// Tolerance on the digital-combiner power constraint.
pub const POWER_CONSTRAINT_TOL: f64 = 1e-8;

// ── Angle random walk ───────────────────────────────────────────────────────

/// Gaussian random walk over the four link angles.
///
/// `sigma_lambda_sq` is the per-step disturbance variance in squared degrees,
/// shared by all four angles. Elevations reflect into their per-side bounds;
/// azimuths wrap modulo a full circle.
#[derive(Clone, Debug)]
pub struct AngleWalk {
    pub aoa_azimuth_rad: f64,
    pub aoa_elevation_rad: f64,
    pub aod_azimuth_rad: f64,
    pub aod_elevation_rad: f64,
    pub sigma_lambda_sq: f64,
    pub aoa_elevation_bounds_rad: (f64, f64),
    pub aod_elevation_bounds_rad: (f64, f64),
}

impl AngleWalk {
    pub fn aoa(&self) -> SteeringAngles {
        SteeringAngles::new(self.aoa_azimuth_rad, self.aoa_elevation_rad)
    }

    pub fn aod(&self) -> SteeringAngles {
        SteeringAngles::new(self.aod_azimuth_rad, self.aod_elevation_rad)
    }
}

/// Advances the walk by one time slot.
///
/// Exactly four Gaussian draws are consumed regardless of the variance, so
/// RNG streams stay aligned when comparing configurations.
pub fn step_walk<R: Rng>(walk: &mut AngleWalk, rng: &mut R) {
    let std_rad = walk.sigma_lambda_sq.sqrt().to_radians();
    let normal = Normal::new(0.0, std_rad).expect("nonnegative walk std");
    let d_aoa_az = normal.sample(rng);
    let d_aoa_el = normal.sample(rng);
    let d_aod_az = normal.sample(rng);
    let d_aod_el = normal.sample(rng);
    walk.aoa_azimuth_rad = wrap_azimuth(walk.aoa_azimuth_rad + d_aoa_az);
    walk.aod_azimuth_rad = wrap_azimuth(walk.aod_azimuth_rad + d_aod_az);
    let (lo_a, hi_a) = walk.aoa_elevation_bounds_rad;
    let (lo_d, hi_d) = walk.aod_elevation_bounds_rad;
    walk.aoa_elevation_rad = reflect(walk.aoa_elevation_rad + d_aoa_el, lo_a, hi_a);
    walk.aod_elevation_rad = reflect(walk.aod_elevation_rad + d_aod_el, lo_d, hi_d);
}

/// Folds `x` into `[lo, hi]` by reflection at both bounds.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    assert!(hi >= lo, "reflect needs an ordered interval");
    if hi == lo {
        return lo;
    }
    let period = 2.0 * (hi - lo);
    let mut y = (x - lo) % period;
    if y < 0.0 {
        y += period;
    }
    if y > hi - lo {
        y = period - y;
    }
    lo + y
}

// ── Link channel ────────────────────────────────────────────────────────────

/// One follower-to-lead link: complex gain `rho` and the current angles.
#[derive(Clone, Debug)]
pub struct LinkChannel {
    pub rho: C64,
    pub walk: AngleWalk,
}

impl LinkChannel {
    /// Arrival-side response at the lead array.
    pub fn aoa_response(&self, shape: &ArrayShape) -> CVec {
        array_response(shape, &self.walk.aoa())
    }

    /// Departure-side response at the follower array.
    pub fn aod_response(&self, shape: &ArrayShape) -> CVec {
        array_response(shape, &self.walk.aod())
    }

    /// Coupling `f^H H w` for a lead beam `f` and follower beam `w`, given
    /// precomputed responses. Cheap path used by the per-slot simulation.
    pub fn coupling(&self, aoa: &CVec, aod: &CVec, f: &CVec, w: &CVec) -> C64 {
        self.rho * f.dot(aoa) * aod.dot(w)
    }
}

/// Full rank-one channel matrix `rho * a_aoa * a_aod^H`.
pub fn channel_matrix(link: &LinkChannel, shape: &ArrayShape) -> CMat {
    let a = link.aoa_response(shape);
    let d = link.aod_response(shape);
    a.outer(&d).scale(link.rho)
}

// ── Observations ────────────────────────────────────────────────────────────

/// Noise at the observation and combining stages.
///
/// `sigma_z_sq` is the total variance of the circular complex pilot noise;
/// `sigma_n_sq` is the per-element receive noise power used for SINR.
#[derive(Clone, Copy, Debug)]
pub struct NoiseModel {
    pub sigma_z_sq: f64,
    pub sigma_n_sq: f64,
}

impl NoiseModel {
    /// Operating point where each link's `|rho|^2 / sigma_z^2` is `snr_db`.
    pub fn at_snr_db(snr_db: f64, rho_power: f64) -> Self {
        let sigma = rho_power * 10f64.powf(-snr_db / 10.0);
        NoiseModel {
            sigma_z_sq: sigma,
            sigma_n_sq: sigma,
        }
    }
}

/// One pilot measurement of a beam pair.
#[derive(Clone, Copy, Debug)]
pub struct Observation {
    pub follower: usize,
    pub time: u64,
    pub n_f: usize,
    pub n_w: usize,
    pub value: C64,
}

impl Observation {
    pub fn power(&self) -> f64 {
        self.value.norm_sqr()
    }
}

/// Noisy pilot value `f^H H w + z`, `z ~ CN(0, sigma_z_sq)`.
pub fn observe_value<R: Rng>(
    link: &LinkChannel,
    aoa: &CVec,
    aod: &CVec,
    f: &CVec,
    w: &CVec,
    noise: &NoiseModel,
    rng: &mut R,
) -> C64 {
    let per_axis = (noise.sigma_z_sq / 2.0).sqrt();
    let normal = Normal::new(0.0, per_axis).expect("nonnegative noise std");
    let z = C64::new(normal.sample(rng), normal.sample(rng));
    link.coupling(aoa, aod, f, w) + z
}

// ── Simulation environment ──────────────────────────────────────────────────

/// Physical world shared by the trackers: links, codebooks, noise, and time.
///
/// Angle walks and pilot noise draw from two independent seeded streams, so a
/// policy that transmits fewer pilots never perturbs the channel trajectory.
/// `advance` moves every link forward one slot; measurements are stamped with
/// the current slot index.
pub struct SimEnv {
    links: Vec<LinkChannel>,
    lead_book: crate::array_geometry::Codebook,
    follower_book: crate::array_geometry::Codebook,
    noise: NoiseModel,
    time: u64,
    walk_rng: rand_chacha::ChaCha8Rng,
    noise_rng: rand_chacha::ChaCha8Rng,
    aoa: Vec<CVec>,
    aod: Vec<CVec>,
}

impl SimEnv {
    pub fn new(
        links: Vec<LinkChannel>,
        lead_book: crate::array_geometry::Codebook,
        follower_book: crate::array_geometry::Codebook,
        noise: NoiseModel,
        walk_rng: rand_chacha::ChaCha8Rng,
        noise_rng: rand_chacha::ChaCha8Rng,
    ) -> Self {
        let lead_shape = lead_book.shape();
        let follower_shape = follower_book.shape();
        let aoa = links.iter().map(|l| l.aoa_response(&lead_shape)).collect();
        let aod = links.iter().map(|l| l.aod_response(&follower_shape)).collect();
        SimEnv {
            links,
            lead_book,
            follower_book,
            noise,
            time: 0,
            walk_rng,
            noise_rng,
            aoa,
            aod,
        }
    }

    pub fn u_count(&self) -> usize {
        self.links.len()
    }

    pub fn lead_book(&self) -> &crate::array_geometry::Codebook {
        &self.lead_book
    }

    pub fn follower_book(&self) -> &crate::array_geometry::Codebook {
        &self.follower_book
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn links(&self) -> &[LinkChannel] {
        &self.links
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Advances every walk by one slot and refreshes the cached responses.
    pub fn advance(&mut self) {
        let lead_shape = self.lead_book.shape();
        let follower_shape = self.follower_book.shape();
        for (i, link) in self.links.iter_mut().enumerate() {
            step_walk(&mut link.walk, &mut self.walk_rng);
            self.aoa[i] = link.aoa_response(&lead_shape);
            self.aod[i] = link.aod_response(&follower_shape);
        }
        self.time += 1;
    }

    /// One noisy pilot measurement of `follower` through lead beam `n_f` and
    /// follower beam `n_w` (1-based codebook indices).
    pub fn measure(&mut self, follower: usize, n_f: usize, n_w: usize) -> Observation {
        let link = &self.links[follower];
        let value = observe_value(
            link,
            &self.aoa[follower],
            &self.aod[follower],
            self.lead_book.vector(n_f),
            self.follower_book.vector(n_w),
            &self.noise,
            &mut self.noise_rng,
        );
        Observation {
            follower,
            time: self.time,
            n_f,
            n_w,
            value,
        }
    }

    /// Exact coupling power of a beam pair under the current channel.
    pub fn true_power(&self, follower: usize, n_f: usize, n_w: usize) -> f64 {
        let link = &self.links[follower];
        link.coupling(
            &self.aoa[follower],
            &self.aod[follower],
            self.lead_book.vector(n_f),
            self.follower_book.vector(n_w),
        )
        .norm_sqr()
    }
}

// ── True SINR ───────────────────────────────────────────────────────────────

/// Exact per-follower SINR under selected analog beams and digital weights.
///
/// `f_idx[u]` / `w_idx[u]` are 1-based codebook entries assigned to follower
/// `u`; column `u` of `f_b` is that follower's digital weight. Every column
/// must satisfy `f^H F^H F f = 1` within [`POWER_CONSTRAINT_TOL`], which pins
/// the post-combining noise power at `sigma_n_sq`.
pub fn true_sinr(
    links: &[LinkChannel],
    lead_book: &crate::array_geometry::Codebook,
    follower_book: &crate::array_geometry::Codebook,
    f_idx: &[usize],
    w_idx: &[usize],
    f_b: &CMat,
    noise: &NoiseModel,
) -> Result<Vec<f64>, ChannelError> {
    let u_count = links.len();
    assert_eq!(f_idx.len(), u_count);
    assert_eq!(w_idx.len(), u_count);
    assert_eq!(f_b.rows(), u_count);
    assert_eq!(f_b.cols(), u_count);

    let lead_shape = lead_book.shape();
    let follower_shape = follower_book.shape();
    let f_cols: Vec<CVec> = f_idx.iter().map(|&i| lead_book.vector(i).clone()).collect();
    let f_mat = CMat::from_cols(&f_cols);
    let gram = f_mat.adjoint().mul(&f_mat);

    for u in 0..u_count {
        let col = f_b.col(u);
        let power = col.dot(&gram.mul_vec(&col)).re;
        let defect = (power - 1.0).abs();
        if defect > POWER_CONSTRAINT_TOL {
            return Err(ChannelError::PowerConstraintViolated { column: u, defect });
        }
    }

    // True effective channel of follower i through the selected lead beams.
    let h: Vec<CVec> = links
        .iter()
        .enumerate()
        .map(|(i, link)| {
            let aoa = link.aoa_response(&lead_shape);
            let aod = link.aod_response(&follower_shape);
            let w = follower_book.vector(w_idx[i]);
            CVec::new(
                f_cols
                    .iter()
                    .map(|f| link.coupling(&aoa, &aod, f, w))
                    .collect(),
            )
        })
        .collect();

    Ok((0..u_count)
        .map(|u| {
            let col = f_b.col(u);
            let signal = col.dot(&h[u]).norm_sqr();
            let interference: f64 = (0..u_count)
                .filter(|&i| i != u)
                .map(|i| col.dot(&h[i]).norm_sqr())
                .sum();
            signal / (interference + noise.sigma_n_sq)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_geometry::{build_codebook, uniform_azimuths_deg};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_walk(sigma_sq: f64) -> AngleWalk {
        AngleWalk {
            aoa_azimuth_rad: 1.0,
            aoa_elevation_rad: 0.3,
            aod_azimuth_rad: 2.0,
            aod_elevation_rad: 0.4,
            sigma_lambda_sq: sigma_sq,
            aoa_elevation_bounds_rad: (0.0, std::f64::consts::FRAC_PI_2),
            aod_elevation_bounds_rad: (0.0, std::f64::consts::FRAC_PI_2),
        }
    }

    fn test_link(rho: C64, sigma_sq: f64) -> LinkChannel {
        LinkChannel {
            rho,
            walk: test_walk(sigma_sq),
        }
    }

    // 1. Zero variance leaves the walk unchanged (draws still consumed).
    #[test]
    fn zero_variance_walk_is_static() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut walk = test_walk(0.0);
        let before = walk.clone();
        for _ in 0..100 {
            step_walk(&mut walk, &mut rng);
        }
        assert_eq!(walk.aoa_azimuth_rad, before.aoa_azimuth_rad);
        assert_eq!(walk.aoa_elevation_rad, before.aoa_elevation_rad);
        assert_eq!(walk.aod_azimuth_rad, before.aod_azimuth_rad);
        assert_eq!(walk.aod_elevation_rad, before.aod_elevation_rad);
    }

    #[test]
    fn reflect_folds_into_interval() {
        assert!((reflect(95.0, 0.0, 90.0) - 85.0).abs() < 1e-12);
        assert!((reflect(-5.0, 0.0, 90.0) - 5.0).abs() < 1e-12);
        assert!((reflect(185.0, 0.0, 90.0) - 5.0).abs() < 1e-12);
        assert!((reflect(40.0, 0.0, 90.0) - 40.0).abs() < 1e-12);
        assert!((reflect(35.0, 0.0, 30.0) - 25.0).abs() < 1e-12);
        assert_eq!(reflect(99.0, 15.0, 15.0), 15.0);
    }

    // 2. Angles stay in range under a long noisy walk.
    #[test]
    fn walk_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut walk = test_walk(16.0);
        walk.aoa_elevation_bounds_rad = (0.0, 30f64.to_radians());
        for _ in 0..10_000 {
            step_walk(&mut walk, &mut rng);
            assert!((0.0..std::f64::consts::TAU).contains(&walk.aoa_azimuth_rad));
            assert!((0.0..std::f64::consts::TAU).contains(&walk.aod_azimuth_rad));
            assert!(walk.aoa_elevation_rad >= 0.0);
            assert!(walk.aoa_elevation_rad <= 30f64.to_radians() + 1e-12);
            assert!(walk.aod_elevation_rad >= 0.0);
            assert!(walk.aod_elevation_rad <= std::f64::consts::FRAC_PI_2 + 1e-12);
        }
    }

    // 3. Moment oracle: increment variance matches sigma_lambda_sq.
    #[test]
    fn walk_increment_variance_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut walk = test_walk(16.0);
        let mut prev = walk.aoa_azimuth_rad;
        let n = 100_000;
        let mut increments = Vec::with_capacity(n);
        for _ in 0..n {
            step_walk(&mut walk, &mut rng);
            // Shortest signed circular difference, valid while steps << half circle.
            let mut d = walk.aoa_azimuth_rad - prev;
            if d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
            }
            if d < -std::f64::consts::PI {
                d += std::f64::consts::TAU;
            }
            increments.push(d.to_degrees());
            prev = walk.aoa_azimuth_rad;
        }
        let mean = increments.iter().sum::<f64>() / n as f64;
        let var = increments.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 16.0).abs() < 0.5, "increment variance {var}");
    }

    // 4. Rank-one structure: Frobenius norm equals |rho|.
    #[test]
    fn channel_matrix_is_rank_one() {
        let shape = ArrayShape { nx: 4, ny: 4 };
        let link = test_link(C64::new(0.3, 0.4), 0.0);
        let h = channel_matrix(&link, &shape);
        assert!((h.frob_norm() - 0.5).abs() < 1e-12);
    }

    // 5. Fast coupling path agrees with the full matrix product.
    #[test]
    fn coupling_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = ArrayShape { nx: 4, ny: 4 };
        let link = test_link(C64::new(0.2, -0.7), 0.0);
        let az = uniform_azimuths_deg(12);
        let book = build_codebook(&az, &[15.0, 45.0, 75.0], shape).unwrap();
        let h = channel_matrix(&link, &shape);
        let aoa = link.aoa_response(&shape);
        let aod = link.aod_response(&shape);
        for _ in 0..10 {
            let f = book.vector(rng.gen_range(1..=book.len()));
            let w = book.vector(rng.gen_range(1..=book.len()));
            let fast = link.coupling(&aoa, &aod, f, w);
            let slow = f.dot(&h.mul_vec(w));
            assert!((fast - slow).norm() < 1e-12);
        }
    }

    // 6. Noiseless observation is the exact coupling; noisy observations have
    // the configured variance.
    #[test]
    fn observation_noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = ArrayShape { nx: 4, ny: 4 };
        let link = test_link(C64::new(1.0, 0.0), 0.0);
        let book = build_codebook(&uniform_azimuths_deg(12), &[15.0], shape).unwrap();
        let f = book.vector(1);
        let w = book.vector(7);
        let aoa = link.aoa_response(&shape);
        let aod = link.aod_response(&shape);

        let clean = NoiseModel { sigma_z_sq: 0.0, sigma_n_sq: 0.0 };
        let y = observe_value(&link, &aoa, &aod, f, w, &clean, &mut rng);
        assert!((y - link.coupling(&aoa, &aod, f, w)).norm() < 1e-15);

        let noisy = NoiseModel { sigma_z_sq: 0.04, sigma_n_sq: 0.04 };
        let coupling = link.coupling(&aoa, &aod, f, w);
        let n = 20_000;
        let var: f64 = (0..n)
            .map(|_| {
                let y = observe_value(&link, &aoa, &aod, f, w, &noisy, &mut rng);
                (y - coupling).norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        assert!((var - 0.04).abs() < 0.004, "noise variance {var}");
    }

    // 7. Single link, aligned beams, identity weight: SINR is the SNR point.
    #[test]
    fn single_link_sinr_is_snr() {
        let shape = ArrayShape { nx: 4, ny: 4 };
        let book = build_codebook(&uniform_azimuths_deg(12), &[15.0], shape).unwrap();
        let mut link = test_link(C64::new(1.0, 0.0), 0.0);
        let a1 = book.angles(1);
        link.walk.aoa_azimuth_rad = a1.azimuth_rad;
        link.walk.aoa_elevation_rad = a1.elevation_rad;
        link.walk.aod_azimuth_rad = a1.azimuth_rad;
        link.walk.aod_elevation_rad = a1.elevation_rad;
        let noise = NoiseModel::at_snr_db(20.0, 1.0);
        let sinr = true_sinr(
            &[link],
            &book,
            &book,
            &[1],
            &[1],
            &CMat::identity(1),
            &noise,
        )
        .unwrap();
        assert!((sinr[0] - 100.0).abs() < 1e-6, "sinr {}", sinr[0]);
    }

    #[test]
    fn power_constraint_violation_is_reported() {
        let shape = ArrayShape { nx: 4, ny: 4 };
        let book = build_codebook(&uniform_azimuths_deg(12), &[15.0], shape).unwrap();
        let link = test_link(C64::new(1.0, 0.0), 0.0);
        let mut f_b = CMat::identity(1);
        f_b[(0, 0)] = C64::new(2.0, 0.0);
        let err = true_sinr(
            &[link],
            &book,
            &book,
            &[1],
            &[1],
            &f_b,
            &NoiseModel::at_snr_db(20.0, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, ChannelError::PowerConstraintViolated { column: 0, .. }));
    }
}
