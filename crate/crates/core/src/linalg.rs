//! Dense complex matrices, states and superoperators.
//!
//! Density matrices are vectorized by column stacking: `vec(A)[i + j*d] = A[(i, j)]`.
//! With that convention `vec(A X B) = (Bᵀ ⊗ A) vec(X)`, and every superoperator
//! matrix in this crate is laid out accordingly.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default Hermiticity tolerance.
pub const TOL_HERM: f64 = 1e-10;
/// Default normalization tolerance for state vectors and traces.
pub const TOL_NORM: f64 = 1e-10;
/// Default tolerance on negative eigenvalues of positive matrices.
pub const TOL_PSD: f64 = 1e-9;
/// Relative singular-value threshold used by [`SuperOp::null_space`].
pub const NULL_SPACE_RTOL: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

fn ensure_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Column-stacking vectorization.
pub fn vec(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for a `d²` vector.
pub fn unvec(v: &CVector, d: usize) -> CMatrix {
    assert_eq!(v.len(), d * d, "unvec: length is not d²");
    CMatrix::from_column_slice(d, d, v.as_slice())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let d = ensure_square(a)?;
    ensure_same_dim(d, ensure_square(b)?)?;
    Ok(a * b - b * a)
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let d = ensure_square(a)?;
    ensure_same_dim(d, ensure_square(b)?)?;
    Ok(a * b + b * a)
}

/// `‖A − A†‖_F ≤ tol·max(1, ‖A‖_F)`.
pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    a.nrows() == a.ncols() && (a - a.adjoint()).norm() <= tol * a.norm().max(1.0)
}

/// `‖AA† − A†A‖_F ≤ tol·max(1, ‖A‖_F²)`.
pub fn is_normal(a: &CMatrix, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let ad = a.adjoint();
    let n = a.norm();
    (a * &ad - &ad * a).norm() <= tol * (n * n).max(1.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Only the lower triangle is trusted by the solver, so the input is
/// Hermitized first.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * re(0.5);
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), h);
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Fix the global phase of a unit vector so that its first component with
/// modulus above `1e-12` is real and positive.
pub fn canonical_phase(v: &mut [C64]) {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12).copied() {
        let phase = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

/// Hermitian eigen-decomposition sorted by descending eigenvalue.
///
/// Eigenvector phases follow [`canonical_phase`]. Eigenvalues closer than
/// `tie_tol` are ordered by their eigenvectors, comparing the first differing
/// component (real part, then imaginary part), so fixtures are stable.
pub fn hermitian_eigen_desc(m: &CMatrix, tie_tol: f64) -> (Vec<f64>, CMatrix) {
    let (values, vectors) = hermitian_eigen(m);
    let n = values.len();
    let mut cols: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<C64> = vectors.column(k).iter().copied().collect();
            canonical_phase(&mut v);
            (values[k], v)
        })
        .collect();
    cols.sort_by(|(la, va), (lb, vb)| {
        if (la - lb).abs() > tie_tol {
            return lb.total_cmp(la);
        }
        for (x, y) in va.iter().zip(vb) {
            if (x.re - y.re).abs() > 1e-12 {
                return y.re.total_cmp(&x.re);
            }
            if (x.im - y.im).abs() > 1e-12 {
                return y.im.total_cmp(&x.im);
            }
        }
        std::cmp::Ordering::Equal
    });
    let values = cols.iter().map(|(l, _)| *l).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| cols[k].1[r]);
    (values, vectors)
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn hermitian_trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.iter().map(|l| l.abs()).sum()
}

/// `exp(−iK)` for Hermitian `K`, built from its eigen-decomposition so the
/// result is unitary to rounding.
pub fn unitary_from_hermitian(k: &CMatrix) -> CMatrix {
    let (values, v) = hermitian_eigen(k);
    let phases = CVector::from_iterator(values.len(), values.iter().map(|l| C64::from_polar(1.0, -l)));
    let mut scaled = v.clone();
    for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *p;
    }
    scaled * v.adjoint()
}

// Padé coefficients and theta thresholds for scaling and squaring
// (Higham, "The scaling and squaring method for the matrix exponential revisited").
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn pade_low(a: &CMatrix, coeffs: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let ident = CMatrix::identity(n, n);
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    for (k, chunk) in coeffs.chunks(2).enumerate() {
        if k > 0 {
            power = &power * &a2;
        }
        v += &power * re(chunk[0]);
        if let Some(&odd) = chunk.get(1) {
            u += &power * re(odd);
        }
    }
    (a * u, v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let b = PADE13.map(re);
    let ident = CMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    (u, v)
}

/// Matrix exponential `exp(t·M)` by scaling and squaring with Padé approximants.
pub fn expm(m: &CMatrix, t: f64) -> Result<CMatrix> {
    let n = ensure_square(m)?;
    if !t.is_finite() || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let a = m * re(t);
    if n == 0 {
        return Ok(a);
    }
    let norm = one_norm(&a);
    let (u, v, squarings) = if norm <= THETA3 {
        let (u, v) = pade_low(&a, &PADE3);
        (u, v, 0)
    } else if norm <= THETA5 {
        let (u, v) = pade_low(&a, &PADE5);
        (u, v, 0)
    } else if norm <= THETA7 {
        let (u, v) = pade_low(&a, &PADE7);
        (u, v, 0)
    } else if norm <= THETA9 {
        let (u, v) = pade_low(&a, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
        let scaled = &a * re(0.5f64.powi(s));
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or(Error::NonFinite)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Normalized generalized Gell-Mann basis of the traceless Hermitian `d×d`
/// matrices, with `Tr(λ_i λ_j) = 2δ_ij`.
///
/// Ordering: for each pair `j < k` (lexicographic) the symmetric then the
/// antisymmetric element, followed by the `d − 1` diagonal elements. For
/// `d = 2` this is `(σ₁, σ₂, σ₃)`.
pub fn gell_mann_basis(d: usize) -> Vec<Operator> {
    let mut basis = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in (j + 1)..d {
            let mut s = CMatrix::zeros(d, d);
            s[(j, k)] = ONE;
            s[(k, j)] = ONE;
            basis.push(Operator(s));
            let mut a = CMatrix::zeros(d, d);
            a[(j, k)] = -I;
            a[(k, j)] = I;
            basis.push(Operator(a));
        }
    }
    for l in 1..d {
        let scale = (2.0 / (l as f64 * (l as f64 + 1.0))).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = re(scale);
        }
        m[(l, l)] = re(-(l as f64) * scale);
        basis.push(Operator(m));
    }
    basis
}

/// Coefficients of `op` in an orthogonal Hermitian basis: `op = Σ_j c_j λ_j`.
///
/// Fails when `op` has a component outside the span (for example a non-zero
/// trace against a traceless basis).
pub fn expand_in_basis(op: &Operator, basis: &[Operator], tol: f64) -> Result<Vec<C64>> {
    let coeffs: Vec<C64> = basis
        .iter()
        .map(|l| {
            ensure_same_dim(op.dim(), l.dim())?;
            let norm_sq = trace(&(&l.0 * &l.0)).re;
            Ok(trace(&(&l.0 * &op.0)) / norm_sq)
        })
        .collect::<Result<_>>()?;
    let mut rebuilt = CMatrix::zeros(op.dim(), op.dim());
    for (cj, l) in coeffs.iter().zip(basis) {
        rebuilt += &l.0 * *cj;
    }
    let residual = (&rebuilt - &op.0).norm();
    if residual > tol * op.0.norm().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "operator is not in the span of the basis (residual {residual:e})"
        )));
    }
    Ok(coeffs)
}

/// Square complex operator on a `d`-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        let d = ensure_square(&m)?;
        if d == 0 {
            return Err(Error::InvalidArgument("operator dimension must be positive".into()));
        }
        Ok(Operator(m))
    }

    /// Build from row-major entries.
    pub fn from_rows(d: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: entries.len() });
        }
        Operator::new(CMatrix::from_row_slice(d, d, entries))
    }

    pub fn from_real_rows(d: usize, entries: &[f64]) -> Result<Self> {
        let e: Vec<C64> = entries.iter().map(|&x| re(x)).collect();
        Operator::from_rows(d, &e)
    }

    pub fn diag(entries: &[C64]) -> Self {
        Operator(CMatrix::from_diagonal(&CVector::from_column_slice(entries)))
    }

    pub fn zeros(d: usize) -> Self {
        Operator(CMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Operator(CMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dagger(&self) -> Operator {
        Operator(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator(&self.0 * s)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> C64 {
        trace(&self.0)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        commutator(&self.0, &other.0).map(Operator)
    }

    pub fn anticommutator(&self, other: &Operator) -> Result<Operator> {
        anticommutator(&self.0, &other.0).map(Operator)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        is_hermitian(&self.0, tol)
    }

    pub fn is_normal(&self, tol: f64) -> bool {
        is_normal(&self.0, tol)
    }

    pub fn expm(&self, t: f64) -> Result<Operator> {
        expm(&self.0, t).map(Operator)
    }

    /// Hermitian and anti-Hermitian parts `(X, Y)` with `A = X + iY`.
    pub fn hermitian_parts(&self) -> (Operator, Operator) {
        let ad = self.0.adjoint();
        let x = (&self.0 + &ad) * re(0.5);
        let y = (&self.0 - &ad) * c(0.0, -0.5);
        (Operator(x), Operator(y))
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        ensure_same_dim(self.dim(), psi.dim())?;
        Ok(StateVector(&self.0 * &psi.0))
    }

    /// Unitary Schur decomposition `A = Q T Q†`, returned as `(Q, T)`.
    pub fn schur(&self) -> (CMatrix, CMatrix) {
        Schur::new(self.0.clone()).unpack()
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Mul<&Operator> for C64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&rhs.0 * self)
    }
}

impl Mul<&Operator> for f64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&rhs.0 * re(self))
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-&self.0)
    }
}

/// Complex numbers serialize as `[re, im]`, matrices as row-major nested lists.
pub(crate) fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    m.row_iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument("ragged matrix rows".into()));
    }
    let flat: Vec<C64> = rows.iter().flatten().map(|[a, b]| c(*a, *b)).collect();
    Ok(CMatrix::from_row_slice(n, m, &flat))
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let m = matrix_from_rows(&rows).map_err(serde::de::Error::custom)?;
        Operator::new(m).map_err(serde::de::Error::custom)
    }
}

/// Named operators. Qubit basis ordering is `(|excited⟩, |ground⟩)`, so that
/// `σ₃|e⟩ = |e⟩` and `σ₋|e⟩ = |g⟩`.
pub mod ops {
    use super::*;

    /// Pauli matrix `σ_k`, `k = 0..=3` (`σ₀` is the identity).
    pub fn pauli(k: usize) -> Operator {
        let m = match k {
            0 => [ONE, ZERO, ZERO, ONE],
            1 => [ZERO, ONE, ONE, ZERO],
            2 => [ZERO, -I, I, ZERO],
            3 => [ONE, ZERO, ZERO, -ONE],
            _ => panic!("pauli index {k} out of range"),
        };
        Operator(CMatrix::from_row_slice(2, 2, &m))
    }

    /// `σ₊ = (σ₁ + iσ₂)/2`, maps ground to excited.
    pub fn sigma_plus() -> Operator {
        Operator(CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]))
    }

    /// `σ₋ = (σ₁ − iσ₂)/2`, maps excited to ground.
    pub fn sigma_minus() -> Operator {
        Operator(CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]))
    }

    /// `P₊ = σ₊σ₋`, projector on the excited state.
    pub fn p_plus() -> Operator {
        Operator::diag(&[ONE, ZERO])
    }

    /// `P₋ = σ₋σ₊`, projector on the ground state.
    pub fn p_minus() -> Operator {
        Operator::diag(&[ZERO, ONE])
    }

    /// Truncated annihilation operator, `a|n⟩ = √n|n−1⟩` on `levels` Fock states.
    pub fn annihilation(levels: usize) -> Operator {
        let mut m = CMatrix::zeros(levels, levels);
        for n in 1..levels {
            m[(n - 1, n)] = re((n as f64).sqrt());
        }
        Operator(m)
    }

    pub fn creation(levels: usize) -> Operator {
        annihilation(levels).dagger()
    }

    /// Number operator `N = a†a`.
    pub fn number(levels: usize) -> Operator {
        let d: Vec<C64> = (0..levels).map(|n| re(n as f64)).collect();
        Operator::diag(&d)
    }

    pub fn basis_projector(d: usize, n: usize) -> Operator {
        let mut m = CMatrix::zeros(d, d);
        m[(n, n)] = ONE;
        Operator(m)
    }
}

/// Pure (possibly un-normalized) state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(CVector);

impl StateVector {
    pub fn new(v: CVector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(StateVector(v))
    }

    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        StateVector::new(CVector::from_column_slice(amps))
    }

    /// Computational basis state `|n⟩`.
    pub fn basis(d: usize, n: usize) -> Self {
        let mut v = CVector::zeros(d);
        v[n] = ONE;
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sq() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<StateVector> {
        let n = self.0.norm();
        if n == 0.0 {
            return Err(Error::InvalidArgument("cannot normalize the zero vector".into()));
        }
        Ok(StateVector(&self.0 / re(n)))
    }

    /// Un-normalized projector `|ψ⟩⟨ψ|`.
    pub fn outer(&self) -> CMatrix {
        &self.0 * self.0.adjoint()
    }
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<[f64; 2]> = self.0.iter().map(|z| [z.re, z.im]).collect();
        v.serialize(s)
    }
}

/// Density matrix. Construction only checks shape; physicality is a predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let d = ensure_square(&m)?;
        if d == 0 {
            return Err(Error::InvalidArgument("density matrix dimension must be positive".into()));
        }
        Ok(DensityMatrix(m))
    }

    pub fn from_state(psi: &StateVector) -> Self {
        DensityMatrix(psi.outer())
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(CMatrix::identity(d, d) / re(d as f64))
    }

    /// `(σ₀ + x·σ)/2` for a qubit Bloch vector.
    pub fn from_bloch(x: [f64; 3]) -> Self {
        let mut m = ops::pauli(0).0;
        for (k, xk) in x.iter().enumerate() {
            m += &ops::pauli(k + 1).0 * re(*xk);
        }
        DensityMatrix(m * re(0.5))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> C64 {
        trace(&self.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        is_hermitian(&self.0, tol)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.0).0.first().copied().unwrap_or(0.0)
    }

    /// Hermitian within `tol_herm`, unit trace within `tol_trace`, eigenvalues
    /// at least `−tol_psd`.
    pub fn is_physical(&self, tol_herm: f64, tol_trace: f64, tol_psd: f64) -> bool {
        self.is_hermitian(tol_herm)
            && (self.trace() - ONE).norm() <= tol_trace
            && self.min_eigenvalue() >= -tol_psd
    }

    /// Diagonal entries (real parts).
    pub fn populations(&self) -> Vec<f64> {
        self.0.diagonal().iter().map(|z| z.re).collect()
    }

    /// Bloch vector `x = Tr(ρσ)`; only defined for qubits.
    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        if self.dim() != 2 {
            return None;
        }
        let comp = |k: usize| trace(&(&self.0 * &ops::pauli(k).0)).re;
        Some([comp(1), comp(2), comp(3)])
    }

    /// `½‖ρ − σ‖₁`, evaluated on the Hermitian part of the difference.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        ensure_same_dim(self.dim(), other.dim())?;
        Ok(0.5 * hermitian_trace_norm(&(&self.0 - &other.0)))
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        ensure_same_dim(self.dim(), op.dim())?;
        Ok(trace(&(&self.0 * &op.0)))
    }
}

/// Matrix of a linear map on `d×d` matrices acting on column-stacked vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOp {
    d: usize,
    m: CMatrix,
}

impl SuperOp {
    pub fn from_matrix(d: usize, m: CMatrix) -> Result<Self> {
        if m.nrows() != d * d || m.ncols() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: m.nrows() });
        }
        Ok(SuperOp { d, m })
    }

    /// Column `j` is `vec(f(E_j))` where `E_j` is the elementary matrix with a
    /// one at `(j mod d, j div d)`.
    pub fn from_map<F>(d: usize, f: F) -> Self
    where
        F: Fn(&CMatrix) -> CMatrix,
    {
        let n = d * d;
        let mut m = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = CMatrix::zeros(d, d);
            e[(j % d, j / d)] = ONE;
            let image = f(&e);
            m.column_mut(j).copy_from_slice(image.as_slice());
        }
        SuperOp { d, m }
    }

    pub fn zeros(d: usize) -> Self {
        SuperOp { d, m: CMatrix::zeros(d * d, d * d) }
    }

    pub fn identity(d: usize) -> Self {
        SuperOp { d, m: CMatrix::identity(d * d, d * d) }
    }

    /// Hilbert-space dimension `d` (the matrix is `d² × d²`).
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        ensure_same_dim(self.d, ensure_square(rho)?)?;
        Ok(unvec(&(&self.m * vec(rho)), self.d))
    }

    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    /// Adjoint with respect to the Hilbert-Schmidt product `Tr(A†B)`.
    pub fn hs_adjoint(&self) -> SuperOp {
        SuperOp { d: self.d, m: self.m.adjoint() }
    }

    pub fn expm(&self, t: f64) -> Result<SuperOp> {
        Ok(SuperOp { d: self.d, m: expm(&self.m, t)? })
    }

    /// `Tr(f(ρ)) = 0` for all `ρ`, i.e. the adjoint annihilates the identity.
    pub fn is_trace_annihilating(&self, tol: f64) -> bool {
        let id = vec(&CMatrix::identity(self.d, self.d));
        (self.m.adjoint() * id).norm() <= tol * self.norm().max(1.0)
    }

    /// Choi matrix `Σ_ij E_ij ⊗ f(E_ij)`.
    pub fn choi(&self) -> CMatrix {
        let d = self.d;
        let mut out = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let image = unvec(&self.m.column(i + j * d).into_owned(), d);
                for k in 0..d {
                    for l in 0..d {
                        out[(i * d + k, j * d + l)] = image[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Orthonormal kernel basis (singular values `≤ rtol·σ_max`), un-vectorized.
    pub fn null_space(&self, rtol: f64) -> Vec<CMatrix> {
        let n = self.m.nrows();
        let svd = SVD::new(self.m.clone(), false, true);
        let v_t = svd.v_t.expect("SVD was asked for V");
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let threshold = rtol * smax;
        (0..n)
            .filter(|&k| svd.singular_values[k] <= threshold)
            .map(|k| {
                let v = v_t.row(k).adjoint();
                unvec(&v, self.d)
            })
            .collect()
    }
}

impl Add for &SuperOp {
    type Output = SuperOp;
    fn add(self, rhs: &SuperOp) -> SuperOp {
        assert_eq!(self.d, rhs.d);
        SuperOp { d: self.d, m: &self.m + &rhs.m }
    }
}

impl Sub for &SuperOp {
    type Output = SuperOp;
    fn sub(self, rhs: &SuperOp) -> SuperOp {
        assert_eq!(self.d, rhs.d);
        SuperOp { d: self.d, m: &self.m - &rhs.m }
    }
}

impl Mul for &SuperOp {
    type Output = SuperOp;
    fn mul(self, rhs: &SuperOp) -> SuperOp {
        assert_eq!(self.d, rhs.d);
        SuperOp { d: self.d, m: &self.m * &rhs.m }
    }
}
