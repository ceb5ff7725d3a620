//! Gaussian noise: real Wiener increments, correlated complex increments and
//! the minimal real-noise representation of a covariance matrix.
//!
//! # Streams
//!
//! Every stream is a ChaCha20 generator. [`NoiseStream::child`]`(seed, i)` keys
//! the cipher with `seed_from_u64(seed)` and selects the 64-bit stream id `i`,
//! so trajectory `i` of an ensemble draws from its own independent stream
//! regardless of scheduling. [`NoiseStream::from_seed`] uses stream id
//! `u64::MAX`, which is never handed to a child.
//!
//! Uniforms take the top 53 bits of a `u64` (`(x >> 11)·2⁻⁵³`). Standard
//! normals come from Box–Muller on pairs of uniforms, `r = √(−2 ln(1 − u₁))`,
//! `θ = 2πu₂`, returning `r cos θ` and then the cached `r sin θ`.

use std::f64::consts::TAU;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_eigen_desc, is_hermitian, re, C64, CMatrix, CVector};

/// Relative singular-value threshold defining the support of `a`.
pub const PINV_RTOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NoiseStream {
    pub fn from_seed(seed: u64) -> Self {
        Self::with_stream(seed, u64::MAX)
    }

    pub fn child(seed: u64, index: u64) -> Self {
        Self::with_stream(seed, index)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NoiseStream { rng, spare: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Fills `out` with independent `N(0, dt)` increments.
    pub fn fill_wiener(&mut self, dt: f64, out: &mut [f64]) {
        let sd = dt.sqrt();
        for w in out.iter_mut() {
            *w = sd * self.standard_normal();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WienerBatch {
    pub dt: f64,
    pub increments: Vec<f64>,
}

pub fn sample_wiener(n_channels: usize, dt: f64, stream: &mut NoiseStream) -> Result<WienerBatch> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut increments = vec![0.0; n_channels];
    stream.fill_wiener(dt, &mut increments);
    Ok(WienerBatch { dt, increments })
}

/// Complex increments `dZ_j = Σ_k c_kj dW_k` with `⟨dZ*_i dZ_j⟩ = a_ij dt`
/// and `⟨dZ_i dZ_j⟩ = b_ij dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexNoiseModel {
    coeffs: CMatrix,
    covariance: CMatrix,
    relation: CMatrix,
}

impl ComplexNoiseModel {
    /// `a = c†c` and `b = cᵀc` for an `N × m` coefficient matrix.
    pub fn from_coeffs(c: CMatrix) -> Self {
        let covariance = c.adjoint() * &c;
        let relation = c.transpose() * &c;
        ComplexNoiseModel { coeffs: c, covariance, relation }
    }

    /// Number of complex channels `m`.
    pub fn channels(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Number of real driving noises `N`.
    pub fn real_noises(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn coeffs(&self) -> &CMatrix {
        &self.coeffs
    }

    pub fn covariance(&self) -> &CMatrix {
        &self.covariance
    }

    pub fn relation(&self) -> &CMatrix {
        &self.relation
    }

    /// `dZ = cᵀ dW` from a given real increment vector.
    pub fn increments_from(&self, dw: &[f64]) -> Result<Vec<C64>> {
        if dw.len() != self.real_noises() {
            return Err(Error::DimensionMismatch { expected: self.real_noises(), found: dw.len() });
        }
        let dw = CVector::from_iterator(dw.len(), dw.iter().map(|&w| re(w)));
        Ok((self.coeffs.transpose() * dw).iter().copied().collect())
    }

    pub fn sample(&self, dt: f64, stream: &mut NoiseStream) -> Result<Vec<C64>> {
        let batch = sample_wiener(self.real_noises(), dt, stream)?;
        self.increments_from(&batch.increments)
    }
}

pub fn sample_complex(model: &ComplexNoiseModel, dt: f64, stream: &mut NoiseStream) -> Result<Vec<C64>> {
    model.sample(dt, stream)
}

fn support_projector_and_pinv(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let (values, vectors) = hermitian_eigen(a);
    let lmax = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut proj = CMatrix::zeros(n, n);
    let mut pinv = CMatrix::zeros(n, n);
    for (k, &l) in values.iter().enumerate() {
        if l > PINV_RTOL * lmax && l > 0.0 {
            let v = vectors.column(k);
            let outer = &v * v.adjoint();
            proj += &outer;
            pinv += outer * re(1.0 / l);
        }
    }
    (proj, pinv)
}

/// Validity of a complex Gaussian second-moment pair `(a, b)`.
///
/// With `a_ij = ⟨dZ*_i dZ_j⟩` (the transpose of `E[dZ dZ†]`), the augmented
/// covariance is positive iff `range(b*) ⊆ range(a)` and
/// `a* − b a⁺ b* ⪰ 0`, where `a⁺` is the pseudo-inverse on the support of `a`.
pub fn check_picinbono(a: &CMatrix, b: &CMatrix, tol: f64) -> Result<bool> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if b.nrows() != m || b.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, found: b.nrows() });
    }
    if !is_hermitian(a, tol) || (b - b.transpose()).norm() > tol * b.norm().max(1.0) {
        return Ok(false);
    }
    let scale = hermitian_eigen(a).0.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if hermitian_eigen(a).0.first().is_some_and(|&l| l < -tol * scale) {
        return Ok(false);
    }
    let (proj, pinv) = support_projector_and_pinv(a);
    let b_conj = b.map(|z| z.conj());
    if (&b_conj - &proj * &b_conj).norm() > tol * b.norm().max(1.0) {
        return Ok(false);
    }
    let schur = a.map(|z| z.conj()) - b * pinv * &b_conj;
    let min = hermitian_eigen(&schur).0.first().copied().unwrap_or(0.0);
    Ok(min >= -tol * scale)
}

/// `a_ij = Σ_k γ_k U*_ki U_kj` with the matching relation matrix
/// `b_ij = Σ_k γ_k U_ki U_kj`, under which `dZ = Uᵀ(√γ ∘ dW)` needs only
/// `rank(a)` real noises.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimalReduction {
    pub unitary: CMatrix,
    /// Descending, non-negative.
    pub gammas: Vec<f64>,
    pub chosen_b: CMatrix,
    active: usize,
}

pub fn minimal_reduction(a: &CMatrix, tol: f64) -> Result<MinimalReduction> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if !is_hermitian(a, tol) {
        return Err(Error::InvalidArgument("covariance matrix is not Hermitian".into()));
    }
    let (values, v) = hermitian_eigen_desc(a, 1e-12 * a.norm().max(1.0));
    let scale = values.first().map(|l| l.abs()).unwrap_or(0.0).max(1.0);
    if let Some(&bad) = values.iter().find(|&&l| l < -tol * scale) {
        return Err(Error::NotPositive(bad));
    }
    let lmax = values.first().copied().unwrap_or(0.0).max(0.0);
    let gammas: Vec<f64> = values
        .iter()
        .map(|&l| if l > PINV_RTOL * lmax && l > 0.0 { l } else { 0.0 })
        .collect();
    let active = gammas.iter().filter(|&&g| g > 0.0).count();
    // a = V diag(γ) V†  ⇒  U = V†.
    let unitary = v.adjoint();
    let mut chosen_b = CMatrix::zeros(m, m);
    for (k, &g) in gammas.iter().enumerate() {
        let row = unitary.row(k);
        chosen_b += row.transpose() * row * re(g);
    }
    Ok(MinimalReduction { unitary, gammas, chosen_b, active })
}

impl MinimalReduction {
    /// Number of real noises needed: `rank(a)`.
    pub fn active_noises(&self) -> usize {
        self.active
    }

    /// `Σ_k γ_k U*_ki U_kj`.
    pub fn covariance(&self) -> CMatrix {
        let m = self.unitary.nrows();
        let mut a = CMatrix::zeros(m, m);
        for (k, &g) in self.gammas.iter().enumerate() {
            let row = self.unitary.row(k);
            a += row.adjoint() * row * re(g);
        }
        a
    }

    /// Coefficients `c_kj = √γ_k U_kj` over the active rows; a
    /// [`ComplexNoiseModel`] built from them has covariance `a` and relation `chosen_b`.
    pub fn coeffs(&self) -> CMatrix {
        let m = self.unitary.ncols();
        CMatrix::from_fn(self.active, m, |k, j| self.unitary[(k, j)] * self.gammas[k].sqrt())
    }

    pub fn noise_model(&self) -> ComplexNoiseModel {
        ComplexNoiseModel::from_coeffs(self.coeffs())
    }

    /// `dZ = Uᵀ(√γ ∘ dW)` from `active_noises()` real increments.
    pub fn increments(&self, dw: &[f64]) -> Result<Vec<C64>> {
        self.noise_model().increments_from(dw)
    }

    /// `U* dZ`, which is real (`√γ_k dW_k`) for increments from [`Self::increments`].
    pub fn rotate(&self, dz: &[C64]) -> Vec<C64> {
        let dz = CVector::from_column_slice(dz);
        (self.unitary.map(|z| z.conj()) * dz).iter().copied().collect()
    }

    /// Largest entrywise deviation of the reconstructed covariance from `a`.
    pub fn roundtrip_error(&self, a: &CMatrix) -> f64 {
        (self.covariance() - a).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// GKLS operators `L'_k = √γ_k Σ_j U_kj λ_j` for the active noises.
    pub fn lindblads(&self, basis: &[crate::linalg::Operator]) -> Result<Vec<crate::linalg::Operator>> {
        if basis.len() != self.unitary.ncols() {
            return Err(Error::DimensionMismatch { expected: self.unitary.ncols(), found: basis.len() });
        }
        let c = self.coeffs();
        let d = basis[0].dim();
        (0..self.active)
            .map(|k| {
                let mut l = CMatrix::zeros(d, d);
                for (j, lam) in basis.iter().enumerate() {
                    l += lam.matrix() * c[(k, j)];
                }
                crate::linalg::Operator::new(l)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE, ZERO};
    use approx::assert_abs_diff_eq;

    #[test]
    fn wiener_is_reproducible() {
        let mut a = NoiseStream::from_seed(42);
        let mut b = NoiseStream::from_seed(42);
        let x = sample_wiener(3, 0.01, &mut a).unwrap();
        let y = sample_wiener(3, 0.01, &mut b).unwrap();
        assert_eq!(x, y);
        let z = sample_wiener(3, 0.01, &mut a).unwrap();
        assert_ne!(x, z);
        let mut child = NoiseStream::child(42, 0);
        assert_ne!(sample_wiener(3, 0.01, &mut child).unwrap(), x);
    }

    #[test]
    fn wiener_golden_fixture() {
        let mut s = NoiseStream::from_seed(2017);
        let batch = sample_wiener(3, 0.01, &mut s).unwrap();
        let golden = [GOLDEN_0, GOLDEN_1, GOLDEN_2];
        for (x, g) in batch.increments.iter().zip(golden) {
            assert_eq!(x.to_bits(), g.to_bits(), "{x:e} vs {g:e}");
        }
    }

    const GOLDEN_0: f64 = -0.2168111551787206;
    const GOLDEN_1: f64 = -0.17600114095985323;
    const GOLDEN_2: f64 = 0.0887747316755538;

    #[test]
    fn wiener_rejects_bad_dt() {
        let mut s = NoiseStream::from_seed(1);
        assert!(sample_wiener(2, 0.0, &mut s).is_err());
        assert!(sample_wiener(2, -1.0, &mut s).is_err());
    }

    #[test]
    fn wiener_mean_over_million_draws() {
        let mut s = NoiseStream::from_seed(7);
        let n = 1_000_000;
        let mut buf = [0.0; 1];
        let mean = (0..n)
            .map(|_| {
                s.fill_wiener(1.0, &mut buf);
                buf[0]
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 5e-3, "mean {mean}");
    }

    #[test]
    fn model_examples() {
        let m = ComplexNoiseModel::from_coeffs(CMatrix::identity(3, 3));
        assert_eq!(m.covariance(), &CMatrix::identity(3, 3));
        assert_eq!(m.relation(), &CMatrix::identity(3, 3));

        let gamma: f64 = 0.4;
        let cm = CMatrix::from_row_slice(1, 3, &[ZERO, ZERO, re(gamma.sqrt())]);
        let m = ComplexNoiseModel::from_coeffs(cm);
        let expected = CMatrix::from_diagonal(&CVector::from_column_slice(&[ZERO, ZERO, re(gamma)]));
        assert!((m.covariance() - &expected).norm() < 1e-15);
        assert!((m.relation() - &expected).norm() < 1e-15);
    }

    #[test]
    fn picinbono_examples() {
        let id = CMatrix::identity(3, 3);
        assert!(check_picinbono(&id, &CMatrix::zeros(3, 3), 1e-10).unwrap());
        assert!(!check_picinbono(&id, &(&id * re(2.0)), 1e-10).unwrap());
        let cm = CMatrix::from_row_slice(2, 3, &[c(0.3, 1.0), ONE, c(0.0, -0.7), re(0.2), c(1.0, 1.0), ZERO]);
        let m = ComplexNoiseModel::from_coeffs(cm);
        assert!(check_picinbono(m.covariance(), m.relation(), 1e-10).unwrap());
        assert!(check_picinbono(&id, &CMatrix::zeros(2, 2), 1e-10).is_err());
        // b outside the support of a.
        let a = CMatrix::from_diagonal(&CVector::from_column_slice(&[ONE, ZERO]));
        let b = CMatrix::from_diagonal(&CVector::from_column_slice(&[ZERO, re(0.1)]));
        assert!(!check_picinbono(&a, &b, 1e-10).unwrap());
    }

    #[test]
    fn reduction_examples() {
        let a = CMatrix::from_diagonal(&CVector::from_column_slice(&[re(2.0), re(0.5)]));
        let r = minimal_reduction(&a, 1e-10).unwrap();
        assert!((&r.unitary - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert!((&r.chosen_b - &a).norm() < 1e-15);
        assert_eq!(r.active_noises(), 2);
        let dz = r.increments(&[0.3, -0.1]).unwrap();
        assert_abs_diff_eq!(dz[0].re, 2f64.sqrt() * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(dz[1].im, 0.0, epsilon = 1e-15);

        let r = minimal_reduction(&CMatrix::zeros(3, 3), 1e-10).unwrap();
        assert_eq!(r.active_noises(), 0);
        assert!(r.increments(&[]).unwrap().iter().all(|z| z.norm() == 0.0));

        let v = CVector::from_column_slice(&[c(0.5, 0.1), c(-0.3, 0.8), re(1.0)]);
        let a = &v * v.adjoint();
        let r = minimal_reduction(&a, 1e-10).unwrap();
        assert_eq!(r.active_noises(), 1);
        assert_abs_diff_eq!(r.gammas[0], v.norm_squared(), epsilon = 1e-14);
        assert!(r.roundtrip_error(&a) < 1e-14);
        let dz = r.increments(&[0.7]).unwrap();
        for z in r.rotate(&dz) {
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn reduction_rejects_indefinite() {
        let a = CMatrix::from_diagonal(&CVector::from_column_slice(&[re(1.0), re(-0.5)]));
        match minimal_reduction(&a, 1e-10) {
            Err(Error::NotPositive(l)) => assert_abs_diff_eq!(l, -0.5, epsilon = 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn complex_sampling_examples() {
        let m = ComplexNoiseModel::from_coeffs(CMatrix::identity(3, 3));
        let mut s = NoiseStream::from_seed(11);
        let dz = sample_complex(&m, 0.01, &mut s).unwrap();
        assert!(dz.iter().all(|z| z.im == 0.0));

        let m = ComplexNoiseModel::from_coeffs(CMatrix::zeros(2, 3));
        let dz = sample_complex(&m, 0.01, &mut s).unwrap();
        assert!(dz.iter().all(|z| z.norm() == 0.0));
    }
}
