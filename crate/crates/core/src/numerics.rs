//! Small dense complex linear algebra sized for beamforming problems.
//!
//! Everything here targets matrices between 2x2 and a few dozen rows: Gram
//! matrices of selected beams, interference-plus-noise matrices, and the
//! generalized Rayleigh quotients built from them. Dense row-major storage
//! and a cyclic Jacobi eigensolver are plenty at that scale.
//!
//! # Example
//!
//! ```
//! use beamsim::numerics::{hermitian_eig, CMat, C64};
//!
//! let m = CMat::from_rows(&[
//!     vec![C64::new(2.0, 0.0), C64::new(0.0, -1.0)],
//!     vec![C64::new(0.0, 1.0), C64::new(2.0, 0.0)],
//! ]);
//! let eig = hermitian_eig(&m).unwrap();
//! assert!((eig.values[0] - 3.0).abs() < 1e-12);
//! assert!((eig.values[1] - 1.0).abs() < 1e-12);
//! ```

use thiserror::Error;

pub use num_complex::Complex64 as C64;

/// Errors from the dense solvers.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum NumericsError {
    /// Input matrix deviates from its conjugate transpose beyond tolerance.
    #[error("matrix is not Hermitian within tolerance")]
    NotHermitian,
    /// Input matrix has an eigenvalue at or below the definiteness floor.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Relative tolerance for accepting a matrix as Hermitian.
const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues below `PD_FLOOR * max_eigenvalue` fail positive-definiteness.
const PD_FLOOR: f64 = 1e-12;
/// Jacobi sweeps stop once the off-diagonal mass falls below this times ||M||_F.
const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 64;

// ── Complex vector ──────────────────────────────────────────────────────────

/// Dense complex column vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CVec {
    data: Vec<C64>,
}

impl CVec {
    pub fn new(data: Vec<C64>) -> Self {
        CVec { data }
    }

    pub fn zeros(n: usize) -> Self {
        CVec {
            data: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Inner product `self^H other` (left argument conjugated).
    pub fn dot(&self, other: &CVec) -> C64 {
        assert_eq!(self.len(), other.len(), "dot length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: C64) -> CVec {
        CVec::new(self.data.iter().map(|c| c * s).collect())
    }

    /// Outer product `self * other^H`.
    pub fn outer(&self, other: &CVec) -> CMat {
        let mut m = CMat::zeros(self.len(), other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                m[(i, j)] = self.data[i] * other.data[j].conj();
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl std::ops::Index<usize> for CVec {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.data[i]
    }
}

impl From<Vec<C64>> for CVec {
    fn from(data: Vec<C64>) -> Self {
        CVec::new(data)
    }
}

// ── Complex matrix ──────────────────────────────────────────────────────────

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        assert!(!rows.is_empty(), "from_rows on empty slice");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        CMat {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    /// Builds a matrix whose j-th column is `cols[j]`.
    pub fn from_cols(cols: &[CVec]) -> Self {
        assert!(!cols.is_empty(), "from_cols on empty slice");
        let rows = cols[0].len();
        assert!(cols.iter().all(|c| c.len() == rows), "ragged columns");
        let mut m = CMat::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..rows {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> CVec {
        assert!(j < self.cols);
        CVec::new((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        let mut m = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut m = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    m[(i, j)] += a * other[(k, j)];
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = CVec::zeros(self.rows);
        for i in 0..self.rows {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        m
    }

    /// Adds `s` to each diagonal entry.
    pub fn add_diag(&self, s: f64) -> CMat {
        assert_eq!(self.rows, self.cols);
        let mut m = self.clone();
        for i in 0..self.rows {
            m[(i, i)] += C64::new(s, 0.0);
        }
        m
    }

    pub fn scale(&self, s: C64) -> CMat {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= s;
        }
        m
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Frobenius distance to the conjugate transpose.
    fn hermitian_defect(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    acc += self[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

// ── Kronecker product ───────────────────────────────────────────────────────

/// Kronecker product of two vectors: entry `i*len(b) + j` is `a[i] * b[j]`.
pub fn kron(a: &CVec, b: &CVec) -> CVec {
    assert!(!a.is_empty() && !b.is_empty(), "kron on empty vector");
    let mut out = CVec::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

// ── Hermitian eigendecomposition ────────────────────────────────────────────

/// Eigendecomposition of a Hermitian matrix.
///
/// `values` are sorted descending; column `j` of `vectors` is the unit-norm
/// eigenvector for `values[j]`, with its first nonzero entry rotated to the
/// positive real axis.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// Cyclic Jacobi eigendecomposition for Hermitian matrices.
///
/// The input is checked against its conjugate transpose (relative tolerance
/// `1e-10`) and symmetrized before the sweeps, so tiny accumulation noise in
/// the caller does not leak into the result.
pub fn hermitian_eig(m: &CMat) -> Result<HermEig, NumericsError> {
    assert_eq!(m.rows(), m.cols(), "hermitian_eig needs a square matrix");
    let n = m.rows();
    let scale = m.frob_norm();
    if scale > 0.0 && m.hermitian_defect() > HERMITIAN_TOL * scale {
        return Err(NumericsError::NotHermitian);
    }

    // Symmetrize: a <- (m + m^H) / 2.
    let mut a = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
        }
    }
    let mut v = CMat::identity(n);

    for _ in 0..MAX_SWEEPS {
        if a.off_diagonal_norm() <= JACOBI_TOL * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap());

    let mut values = Vec::with_capacity(n);
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(a[(src, src)].re);
        let col = normalize_phase(&v.col(src));
        for i in 0..n {
            vectors[(i, dst)] = col[i];
        }
    }
    Ok(HermEig { values, vectors })
}

/// One two-sided Jacobi rotation zeroing `a[(p, q)]`, accumulated into `v`.
fn jacobi_rotate(a: &mut CMat, v: &mut CMat, p: usize, q: usize) {
    let g = a[(p, q)];
    let mag = g.norm();
    if mag <= f64::MIN_POSITIVE {
        a[(p, q)] = C64::new(0.0, 0.0);
        a[(q, p)] = C64::new(0.0, 0.0);
        return;
    }
    let phase = g / mag;
    let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // Column update: col_p <- c*col_p - s*conj(phase)*col_q,
    //                col_q <- s*phase*col_p + c*col_q.
    let n = a.rows();
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * c - aiq * s * phase.conj();
        a[(i, q)] = aip * s * phase + aiq * c;
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * c - viq * s * phase.conj();
        v[(i, q)] = vip * s * phase + viq * c;
    }
    // Row update with the conjugated coefficients.
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = apj * c - aqj * s * phase;
        a[(q, j)] = apj * s * phase.conj() + aqj * c;
    }
    // Exact zeros where the rotation was aimed; diagonal stays real.
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
}

/// Rotates a vector so its first entry above the phase floor is real positive.
fn normalize_phase(v: &CVec) -> CVec {
    for i in 0..v.len() {
        let mag = v[i].norm();
        if mag > 1e-12 {
            return v.scale(v[i].conj() / mag);
        }
    }
    v.clone()
}

// ── Inverse square root ─────────────────────────────────────────────────────

/// Inverse principal square root of a Hermitian positive-definite matrix.
///
/// Returns `R` with `R * m * R ≈ I`. Eigenvalues at or below
/// `1e-12 * max_eigenvalue` are rejected as not positive definite.
pub fn inv_sqrt_pd(m: &CMat) -> Result<CMat, NumericsError> {
    let eig = hermitian_eig(m)?;
    let max = eig.values[0];
    if max <= 0.0 || eig.values.iter().any(|&l| l <= PD_FLOOR * max) {
        return Err(NumericsError::NotPositiveDefinite);
    }
    let n = m.rows();
    let mut scaled = CMat::zeros(n, n);
    for j in 0..n {
        let inv_sqrt = 1.0 / eig.values[j].sqrt();
        for i in 0..n {
            scaled[(i, j)] = eig.vectors[(i, j)] * inv_sqrt;
        }
    }
    let mut r = scaled.mul(&eig.vectors.adjoint());
    // Force exact Hermitian symmetry onto rounding noise.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (r[(i, j)] + r[(j, i)].conj()) * 0.5;
            r[(i, j)] = avg;
            r[(j, i)] = avg.conj();
        }
        r[(i, i)] = C64::new(r[(i, i)].re, 0.0);
    }
    Ok(r)
}

// ── Generalized Rayleigh quotient ───────────────────────────────────────────

/// Maximizes `x^H a x / x^H b x` over unit-norm `x`.
///
/// `a` must be Hermitian PSD and `b` Hermitian PD. Returns the maximizer
/// (unit norm, phase-normalized) and the attained quotient, computed as the
/// dominant eigenvalue of `b^{-1/2} a b^{-1/2}`.
pub fn max_generalized_rayleigh(a: &CMat, b: &CMat) -> Result<(CVec, f64), NumericsError> {
    assert_eq!(a.rows(), b.rows(), "rayleigh dimension mismatch");
    let r = inv_sqrt_pd(b)?;
    let c = r.mul(a).mul(&r);
    let eig = hermitian_eig(&c)?;
    let x = r.mul_vec(&eig.vectors.col(0));
    let x = normalize_phase(&x.scale(C64::new(1.0 / x.norm(), 0.0)));
    Ok((x, eig.values[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-9;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
        CVec::new(
            (0..n)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        let mut b = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        b.add(&b.adjoint())
    }

    /// Random unitary via Gram-Schmidt on a random complex matrix.
    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        let mut cols: Vec<CVec> = Vec::new();
        while cols.len() < n {
            let mut v = random_cvec(rng, n);
            for u in &cols {
                let proj = u.dot(&v);
                for i in 0..n {
                    let ui = u[i];
                    v[i] -= proj * ui;
                }
            }
            let norm = v.norm();
            if norm > 1e-6 {
                cols.push(v.scale(c(1.0 / norm, 0.0)));
            }
        }
        CMat::from_cols(&cols)
    }

    fn assert_close(a: C64, b: C64, tol: f64, what: &str) {
        assert!((a - b).norm() <= tol, "{what}: {a} vs {b}");
    }

    // 1. Kronecker product against the index-by-index definition.
    #[test]
    fn kron_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_cvec(&mut rng, 3);
        let b = random_cvec(&mut rng, 4);
        let k = kron(&a, &b);
        assert_eq!(k.len(), 12);
        for i in 0..3 {
            for j in 0..4 {
                assert_close(k[i * 4 + j], a[i] * b[j], 1e-15, "kron entry");
            }
        }
    }

    // 2. Norm of a Kronecker product is the product of norms.
    #[test]
    fn kron_norm_is_product_of_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let a = random_cvec(&mut rng, 4);
            let b = random_cvec(&mut rng, 4);
            let k = kron(&a, &b);
            assert!((k.norm() - a.norm() * b.norm()).abs() < 1e-12);
        }
    }

    // 3. Identity decomposes to unit eigenvalues with identity vectors.
    #[test]
    fn eig_identity() {
        let eig = hermitian_eig(&CMat::identity(4)).unwrap();
        for v in &eig.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((eig.vectors[(i, j)] - c(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    // 4. Diagonal input: eigenvalues sorted descending.
    #[test]
    fn eig_sorts_descending() {
        let m = CMat::from_rows(&[
            vec![c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)],
        ]);
        let eig = hermitian_eig(&m).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0, 1.0]);
        // Eigenvector of the top value points along axis 0.
        assert!((eig.vectors[(0, 0)].re - 1.0).abs() < 1e-14);
    }

    // 5. Construct-then-decompose: recover a planted spectrum.
    #[test]
    fn eig_recovers_planted_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let planted = [5.0, 2.0, 1e-3];
        let q = random_unitary(&mut rng, 3);
        let mut lam = CMat::zeros(3, 3);
        for (i, &l) in planted.iter().enumerate() {
            lam[(i, i)] = c(l, 0.0);
        }
        let m = q.mul(&lam).mul(&q.adjoint());
        let eig = hermitian_eig(&m).unwrap();
        for (got, want) in eig.values.iter().zip(planted.iter()) {
            assert!((got - want).abs() < 1e-8, "eigenvalue {got} vs {want}");
        }
        // Distinct spectrum: eigenvectors match the planted basis up to phase.
        for j in 0..3 {
            let overlap = q.col(j).dot(&eig.vectors.col(j)).norm();
            assert!((overlap - 1.0).abs() < 1e-8, "overlap {overlap}");
        }
    }

    // 6. Residual contract ||M v - lambda v|| <= 1e-9 * ||M||_F on random input.
    #[test]
    fn eig_residuals_within_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 6, 16, 36] {
            let m = random_hermitian(&mut rng, n);
            let eig = hermitian_eig(&m).unwrap();
            let bound = TOL * m.frob_norm();
            for j in 0..n {
                let v = eig.vectors.col(j);
                let mv = m.mul_vec(&v);
                let lv = v.scale(c(eig.values[j], 0.0));
                let mut resid = 0.0;
                for i in 0..n {
                    resid += (mv[i] - lv[i]).norm_sqr();
                }
                assert!(resid.sqrt() <= bound, "residual {} > {}", resid.sqrt(), bound);
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            // Orthonormal eigenbasis.
            let gram = eig.vectors.adjoint().mul(&eig.vectors);
            let mut defect = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    defect += (gram[(i, j)] - c(expect, 0.0)).norm_sqr();
                }
            }
            assert!(defect.sqrt() < 1e-10);
        }
    }

    // 7. Phase convention: first nonzero entry of each eigenvector is real positive.
    #[test]
    fn eig_phase_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = random_hermitian(&mut rng, 5);
        let eig = hermitian_eig(&m).unwrap();
        for j in 0..5 {
            let v = eig.vectors.col(j);
            let first = (0..5).find(|&i| v[i].norm() > 1e-12).unwrap();
            assert!(v[first].im.abs() < 1e-12 && v[first].re > 0.0);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMat::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ]);
        assert_eq!(hermitian_eig(&m).unwrap_err(), NumericsError::NotHermitian);
    }

    // 8. inv_sqrt_pd contract: R M R = I within 1e-8, R Hermitian.
    #[test]
    fn inv_sqrt_commutes_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [2usize, 3, 6] {
            // PD by construction: B^H B + 0.1 I.
            let b = random_hermitian(&mut rng, n);
            let m = b.mul(&b).add_diag(0.1);
            let r = inv_sqrt_pd(&m).unwrap();
            let prod = r.mul(&m).mul(&r);
            let mut defect = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    defect += (prod[(i, j)] - c(expect, 0.0)).norm_sqr();
                }
            }
            assert!(defect.sqrt() < 1e-8, "RMR defect {}", defect.sqrt());
            assert!(r.hermitian_defect() < 1e-12);
        }
    }

    #[test]
    fn inv_sqrt_of_identity_is_identity() {
        let r = inv_sqrt_pd(&CMat::identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((r[(i, j)] - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn inv_sqrt_rejects_semidefinite() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        assert_eq!(
            inv_sqrt_pd(&m).unwrap_err(),
            NumericsError::NotPositiveDefinite
        );
    }

    // 9. Rayleigh quotient with b = I reduces to the dominant eigenvector.
    #[test]
    fn rayleigh_reduces_to_dominant_eigenvector() {
        let m = CMat::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(5.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)],
        ]);
        let (x, val) = max_generalized_rayleigh(&m, &CMat::identity(3)).unwrap();
        assert!((val - 5.0).abs() < 1e-12);
        assert!((x[1].re - 1.0).abs() < 1e-12 && x[0].norm() < 1e-12);
    }

    // 10. Returned value equals the quotient at the returned maximizer, and
    // dominates the quotient over random unit vectors.
    #[test]
    fn rayleigh_dominates_random_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let h = random_cvec(&mut rng, 3);
        let a = h.outer(&h);
        let base = random_hermitian(&mut rng, 3);
        let b = base.mul(&base).add_diag(0.2);
        let (x, val) = max_generalized_rayleigh(&a, &b).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-12);

        let quot = |v: &CVec| {
            let num = v.dot(&a.mul_vec(v)).re;
            let den = v.dot(&b.mul_vec(v)).re;
            num / den
        };
        assert!((quot(&x) - val).abs() < 1e-8 * val.max(1.0));
        for _ in 0..10_000 {
            let v = random_cvec(&mut rng, 3);
            assert!(quot(&v) <= val + 1e-9, "random vector beat the maximizer");
        }
    }

    #[test]
    fn rayleigh_propagates_definiteness_errors() {
        let a = CMat::identity(2);
        let b = CMat::zeros(2, 2);
        assert_eq!(
            max_generalized_rayleigh(&a, &b).unwrap_err(),
            NumericsError::NotPositiveDefinite
        );
    }
}
