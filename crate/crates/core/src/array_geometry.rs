//! Uniform rectangular array steering vectors and beam codebooks.
//!
//! Arrays are `NX x NY` grids of elements at half-wavelength spacing. A
//! steering vector toward (azimuth, elevation) factors into per-axis phase
//! ramps combined with a Kronecker product, so every vector here has unit
//! norm by construction. Codebooks are flat, 1-indexed lists of steering
//! vectors over an angle grid, ordered elevation-major.
//!
//! # Example
//!
//! ```
//! use beamsim::array_geometry::{steering_vector, ArrayShape, SteeringAngles};
//!
//! let shape = ArrayShape { nx: 4, ny: 4 };
//! let beam = steering_vector(&shape, &SteeringAngles::from_degrees(45.0, 15.0));
//! assert!((beam.norm() - 1.0).abs() < 1e-12);
//! ```

use crate::numerics::{kron, C64, CVec};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    /// A codebook angle list contains a repeated value.
    #[error("duplicate {axis} angle at {degrees} deg")]
    DuplicateAngle { axis: &'static str, degrees: String },
}

/// Element grid of a uniform rectangular array, half-wavelength spacing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArrayShape {
    pub nx: usize,
    pub ny: usize,
}

impl ArrayShape {
    pub fn elements(&self) -> usize {
        self.nx * self.ny
    }
}

/// Propagation direction seen by an array.
///
/// Azimuth is wrapped into `[0, 2*pi)`; elevation is physical in `[0, pi/2]`
/// for codebook entries (`0` is broadside for this parameterization).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteeringAngles {
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
}

impl SteeringAngles {
    pub fn new(azimuth_rad: f64, elevation_rad: f64) -> Self {
        SteeringAngles {
            azimuth_rad: wrap_azimuth(azimuth_rad),
            elevation_rad,
        }
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Self {
        SteeringAngles::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_rad.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_rad.to_degrees()
    }
}

/// Wraps an angle into `[0, 2*pi)`.
pub fn wrap_azimuth(rad: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = rad % two_pi;
    if a < 0.0 {
        a += two_pi;
    }
    a
}

/// Steering vector of `shape` toward `angles`.
///
/// Per-axis phase ramps at half-wavelength spacing,
/// `exp(-j*pi*cos(az)*sin(el)*n) / sqrt(NX)` along x (and `sin(az)` along y),
/// combined as `f_x (x) f_y`; the result has unit norm.
pub fn steering_vector(shape: &ArrayShape, angles: &SteeringAngles) -> CVec {
    let dir_x = angles.azimuth_rad.cos() * angles.elevation_rad.sin();
    let dir_y = angles.azimuth_rad.sin() * angles.elevation_rad.sin();
    let fx = axis_ramp(shape.nx, dir_x);
    let fy = axis_ramp(shape.ny, dir_y);
    kron(&fx, &fy)
}

/// Array response toward a propagation direction (same form as a codebook
/// steering vector; the two sides of a link evaluate it at their own angles).
pub fn array_response(shape: &ArrayShape, angles: &SteeringAngles) -> CVec {
    steering_vector(shape, angles)
}

fn axis_ramp(n: usize, direction_cosine: f64) -> CVec {
    assert!(n > 0, "array axis must have at least one element");
    let scale = 1.0 / (n as f64).sqrt();
    CVec::new(
        (0..n)
            .map(|k| {
                let phase = -std::f64::consts::PI * direction_cosine * k as f64;
                C64::from_polar(scale, phase)
            })
            .collect(),
    )
}

/// Flat list of steering vectors over an angle grid, indexed from 1.
///
/// Ordering is elevation-major: all azimuths at the first elevation, then all
/// azimuths at the second, and so on.
#[derive(Clone, Debug)]
pub struct Codebook {
    shape: ArrayShape,
    angles: Vec<SteeringAngles>,
    vectors: Vec<CVec>,
    n_azimuth: usize,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn shape(&self) -> ArrayShape {
        self.shape
    }

    pub fn azimuth_count(&self) -> usize {
        self.n_azimuth
    }

    /// Steering vector for 1-based entry `index`.
    pub fn vector(&self, index: usize) -> &CVec {
        assert!(index >= 1 && index <= self.len(), "codebook index {index}");
        &self.vectors[index - 1]
    }

    /// Grid angles for 1-based entry `index`.
    pub fn angles(&self, index: usize) -> SteeringAngles {
        assert!(index >= 1 && index <= self.len(), "codebook index {index}");
        self.angles[index - 1]
    }
}

/// Builds a codebook over `azimuths_deg x elevations_deg`, elevation-major.
pub fn build_codebook(
    azimuths_deg: &[f64],
    elevations_deg: &[f64],
    shape: ArrayShape,
) -> Result<Codebook, GeometryError> {
    assert!(
        !azimuths_deg.is_empty() && !elevations_deg.is_empty(),
        "codebook needs at least one azimuth and one elevation"
    );
    check_distinct(azimuths_deg, "azimuth")?;
    check_distinct(elevations_deg, "elevation")?;

    let mut angles = Vec::with_capacity(azimuths_deg.len() * elevations_deg.len());
    let mut vectors = Vec::with_capacity(angles.capacity());
    for &el in elevations_deg {
        for &az in azimuths_deg {
            let a = SteeringAngles::from_degrees(az, el);
            vectors.push(steering_vector(&shape, &a));
            angles.push(a);
        }
    }
    Ok(Codebook {
        shape,
        angles,
        vectors,
        n_azimuth: azimuths_deg.len(),
    })
}

fn check_distinct(values: &[f64], axis: &'static str) -> Result<(), GeometryError> {
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            if (values[i] - values[j]).abs() < 1e-9 {
                return Err(GeometryError::DuplicateAngle {
                    axis,
                    degrees: format!("{}", values[i]),
                });
            }
        }
    }
    Ok(())
}

/// Azimuth grid used by the experiments: `15 + 30k` degrees for `k = 0..n-1`.
pub fn uniform_azimuths_deg(count: usize) -> Vec<f64> {
    let step = 360.0 / count as f64;
    (0..count).map(|k| step / 2.0 + step * k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    // 1. Elevation zero points broadside: every entry is 1/sqrt(N).
    #[test]
    fn broadside_entries_are_uniform() {
        let shape = ArrayShape { nx: 4, ny: 4 };
        let v = steering_vector(&shape, &SteeringAngles::from_degrees(123.0, 0.0));
        for i in 0..16 {
            assert!((v[i] - C64::new(0.25, 0.0)).norm() < TOL);
        }
    }

    // 2. Hand-computed 2x2 case: az 0, el 90 gives cos*sin = 1 along x.
    #[test]
    fn matches_hand_computed_two_by_two() {
        let shape = ArrayShape { nx: 2, ny: 2 };
        let v = steering_vector(&shape, &SteeringAngles::from_degrees(0.0, 90.0));
        let expect = [0.5, 0.5, -0.5, -0.5];
        for (i, &e) in expect.iter().enumerate() {
            assert!((v[i] - C64::new(e, 0.0)).norm() < 1e-10, "entry {i}: {}", v[i]);
        }
    }

    // 3. Perfectly aligned beam captures all the energy.
    #[test]
    fn aligned_inner_product_is_one() {
        let shape = ArrayShape { nx: 4, ny: 4 };
        for (az, el) in [(15.0, 15.0), (200.0, 45.0), (345.0, 75.0)] {
            let a = SteeringAngles::from_degrees(az, el);
            let f = steering_vector(&shape, &a);
            let g = array_response(&shape, &a);
            assert!((f.dot(&g).norm() - 1.0).abs() < TOL);
        }
    }

    // 4. Misaligned beams capture strictly less.
    #[test]
    fn misaligned_inner_product_below_one() {
        let shape = ArrayShape { nx: 4, ny: 4 };
        let f = steering_vector(&shape, &SteeringAngles::from_degrees(15.0, 15.0));
        let a = array_response(&shape, &SteeringAngles::from_degrees(95.0, 15.0));
        assert!(f.dot(&a).norm() < 0.9);
    }

    proptest! {
        // Unit norm regardless of angles or array shape.
        #[test]
        fn steering_vector_unit_norm(
            az in 0.0..360.0f64,
            el in 0.0..90.0f64,
            nx in 1usize..6,
            ny in 1usize..6,
        ) {
            let v = steering_vector(&ArrayShape { nx, ny }, &SteeringAngles::from_degrees(az, el));
            prop_assert!((v.norm() - 1.0).abs() < TOL);
        }
    }

    // 5. Elevation-major ordering: entry 13 of a 12x3 book starts the second
    // elevation row at the first azimuth.
    #[test]
    fn codebook_ordering_elevation_major() {
        let az = uniform_azimuths_deg(12);
        let book = build_codebook(&az, &[15.0, 45.0, 75.0], ArrayShape { nx: 4, ny: 4 }).unwrap();
        assert_eq!(book.len(), 36);
        let a13 = book.angles(13);
        assert!((a13.azimuth_deg() - 15.0).abs() < 1e-9);
        assert!((a13.elevation_deg() - 45.0).abs() < 1e-9);
        let a12 = book.angles(12);
        assert!((a12.azimuth_deg() - 345.0).abs() < 1e-9);
        assert!((a12.elevation_deg() - 15.0).abs() < 1e-9);
    }

    #[test]
    fn codebook_single_elevation_len() {
        let az = uniform_azimuths_deg(12);
        let book = build_codebook(&az, &[15.0], ArrayShape { nx: 4, ny: 4 }).unwrap();
        assert_eq!(book.len(), 12);
        assert_eq!(book.azimuth_count(), 12);
    }

    #[test]
    fn codebook_rejects_duplicate_angles() {
        let err = build_codebook(&[15.0, 15.0], &[15.0], ArrayShape { nx: 2, ny: 2 }).unwrap_err();
        assert!(matches!(err, GeometryError::DuplicateAngle { axis: "azimuth", .. }));
    }

    #[test]
    fn uniform_azimuths_match_experiment_grid() {
        let az = uniform_azimuths_deg(12);
        assert_eq!(az.len(), 12);
        assert!((az[0] - 15.0).abs() < 1e-12);
        assert!((az[1] - 45.0).abs() < 1e-12);
        assert!((az[11] - 345.0).abs() < 1e-12);
    }
}
