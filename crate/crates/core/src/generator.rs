//! GKLS generators: `dρ/dt = −i[H₁, ρ] − ½ Σ_k ({L_k†L_k, ρ} − 2 L_k ρ L_k†)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    expand_in_basis, hermitian_eigen, hermitian_eigen_desc, re, trace, vec, CMatrix, DensityMatrix,
    Operator, SuperOp, I, NULL_SPACE_RTOL, TOL_HERM, TOL_PSD,
};

/// Default relative tolerance for superoperator equality.
pub const TOL_SUPEROP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GklsGenerator {
    hamiltonian: Operator,
    lindblads: Vec<Operator>,
}

/// Stratonovich Hamiltonians `H₁ˢ`, `H₂ˢ` with `H₁ˢ − iH₂ˢ = H₁ − iH₂ + (i/2) Σ L_k²`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratonovichForm {
    pub h1s: Operator,
    pub h2s: Operator,
    pub lindblads: Vec<Operator>,
}

impl StratonovichForm {
    /// Non-Hermitian drift Hamiltonian `H₁ˢ − iH₂ˢ`.
    pub fn effective_hamiltonian(&self) -> CMatrix {
        self.h1s.matrix() - self.h2s.matrix() * I
    }

    /// Recovers the Ito drift Hamiltonian `H₁ − iH₂` by removing the `(i/2) Σ L_k²` shift.
    pub fn ito_hamiltonian(&self) -> CMatrix {
        let mut h = self.effective_hamiltonian();
        for l in &self.lindblads {
            h -= l.matrix() * l.matrix() * re(0.5) * I;
        }
        h
    }

    /// `H_η` is Hermitian for every noise realization iff `H₂ˢ = 0`.
    pub fn has_hermitian_noise(&self, tol: f64) -> bool {
        let scale = self.lindblads.iter().map(|l| l.norm().powi(2)).sum::<f64>().max(1.0);
        self.h2s.norm() <= tol * scale
    }
}

impl GklsGenerator {
    /// Validates that `H₁` is Hermitian and every `L_k` has the same dimension.
    pub fn new(hamiltonian: Operator, lindblads: Vec<Operator>) -> Result<Self> {
        let d = hamiltonian.dim();
        if !hamiltonian.is_hermitian(TOL_HERM) {
            let dev = (hamiltonian.matrix() - hamiltonian.matrix().adjoint()).norm();
            return Err(Error::NonHermitianHamiltonian(dev));
        }
        if let Some(l) = lindblads.iter().find(|l| l.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: l.dim() });
        }
        Ok(GklsGenerator { hamiltonian, lindblads })
    }

    /// Purely dissipative generator (`H₁ = 0`).
    pub fn dissipative(dim: usize, lindblads: Vec<Operator>) -> Result<Self> {
        GklsGenerator::new(Operator::zeros(dim), lindblads)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn lindblads(&self) -> &[Operator] {
        &self.lindblads
    }

    /// More channels than `d² − 1`: accepted, but some are linearly dependent.
    pub fn exceeds_channel_bound(&self) -> bool {
        let d = self.dim();
        self.lindblads.len() > d * d - 1
    }

    pub fn with_hamiltonian(&self, hamiltonian: Operator) -> Result<Self> {
        GklsGenerator::new(hamiltonian, self.lindblads.clone())
    }

    fn check_dim(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: m.nrows() });
        }
        Ok(())
    }

    fn dissipate(&self, rho: &CMatrix) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for l in &self.lindblads {
            let l = l.matrix();
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += l * rho * &ld - (&ldl * rho + rho * &ldl) * re(0.5);
        }
        out
    }

    fn dissipate_dual(&self, a: &CMatrix) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for l in &self.lindblads {
            let l = l.matrix();
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += &ld * a * l - (&ldl * a + a * &ldl) * re(0.5);
        }
        out
    }

    /// `dρ/dt`; the `−i[H₁, ρ]` term only when `include_hamiltonian`.
    pub fn apply(&self, rho: &CMatrix, include_hamiltonian: bool) -> Result<CMatrix> {
        self.check_dim(rho)?;
        let mut out = self.dissipate(rho);
        if include_hamiltonian {
            let h = self.hamiltonian.matrix();
            out -= (h * rho - rho * h) * I;
        }
        Ok(out)
    }

    /// Heisenberg-picture generator `𝓛^♯A`, with `+i[H₁, A]` when requested.
    pub fn apply_dual(&self, a: &CMatrix, include_hamiltonian: bool) -> Result<CMatrix> {
        self.check_dim(a)?;
        let mut out = self.dissipate_dual(a);
        if include_hamiltonian {
            let h = self.hamiltonian.matrix();
            out += (h * a - a * h) * I;
        }
        Ok(out)
    }

    /// `H₂ = ½ Σ L_k†L_k`, fixed by weak conservation of probability.
    pub fn h2_ito(&self) -> Operator {
        let d = self.dim();
        let mut h2 = CMatrix::zeros(d, d);
        for l in &self.lindblads {
            h2 += l.matrix().adjoint() * l.matrix();
        }
        Operator::new(h2 * re(0.5)).expect("square by construction")
    }

    pub fn to_stratonovich(&self) -> StratonovichForm {
        let d = self.dim();
        let mut im_part = CMatrix::zeros(d, d);
        let mut h2s = CMatrix::zeros(d, d);
        for l in &self.lindblads {
            let l = l.matrix();
            let l2 = l * l;
            let l2d = l2.adjoint();
            // (L² − L²†)/(2i)
            im_part += (&l2 - &l2d) * crate::linalg::c(0.0, -0.5);
            h2s += l.adjoint() * l - (&l2 + &l2d) * re(0.5);
        }
        let h1s = self.hamiltonian.matrix() - im_part * re(0.5);
        StratonovichForm {
            h1s: Operator::new(h1s).expect("square"),
            h2s: Operator::new(h2s * re(0.5)).expect("square"),
            lindblads: self.lindblads.clone(),
        }
    }

    /// Matrix of the dissipative part `𝓛`.
    pub fn dissipator_superop(&self) -> SuperOp {
        SuperOp::from_map(self.dim(), |r| self.dissipate(r))
    }

    /// Matrix of the dual dissipative part `𝓛^♯`.
    pub fn dual_superop(&self) -> SuperOp {
        SuperOp::from_map(self.dim(), |r| self.dissipate_dual(r))
    }

    /// Matrix of `𝓛_tot = 𝓛_H + 𝓛`.
    pub fn liouvillian(&self) -> SuperOp {
        SuperOp::from_map(self.dim(), |r| self.apply(r, true).expect("dimension checked"))
    }

    /// `𝓛 = 𝓛^♯` on the dissipative part, compared as superoperators with
    /// relative Frobenius tolerance.
    pub fn is_self_dual(&self, tol: f64) -> bool {
        let l = self.dissipator_superop();
        let ld = self.dual_superop();
        (&l - &ld).norm() <= tol * l.norm().max(1.0)
    }

    /// `𝓛^♯(𝕀) = 0`, i.e. `Tr(𝓛_tot ρ) = 0` for all `ρ`.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        let d = self.dim();
        let id = CMatrix::identity(d, d);
        let scale = self.liouvillian().norm().max(1.0);
        self.apply_dual(&id, true).map(|m| m.norm() <= tol * scale).unwrap_or(false)
    }

    /// `ρ(t) = exp(t 𝓛_tot) ρ₀` at each requested time (sorted, non-negative).
    ///
    /// Consecutive propagators are reused when the time increments repeat.
    pub fn evolve_exact(&self, rho0: &DensityMatrix, times: &[f64]) -> Result<Vec<DensityMatrix>> {
        self.check_dim(rho0.matrix())?;
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidArgument("times must be finite and non-negative".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("times must be sorted".into()));
        }
        let liouvillian = self.liouvillian();
        let mut out = Vec::with_capacity(times.len());
        let mut state = vec(rho0.matrix());
        let mut t_prev = 0.0;
        let mut cached: Option<(f64, SuperOp)> = None;
        for &t in times {
            let step = t - t_prev;
            if step > 0.0 {
                let reuse = matches!(&cached, Some((h, _)) if (h - step).abs() <= 1e-12 * step.max(1.0));
                if !reuse {
                    cached = Some((step, liouvillian.expm(step)?));
                }
                let prop = &cached.as_ref().expect("set above").1;
                state = prop.matrix() * state;
            }
            t_prev = t;
            out.push(DensityMatrix::new(crate::linalg::unvec(&state, self.dim()))?);
        }
        Ok(out)
    }

    /// Physical stationary states spanning the kernel of `𝓛_tot`.
    ///
    /// Kernel elements are split into Hermitian parts, and each Hermitian part
    /// into its positive and negative spectral parts (both stationary for a
    /// GKLS semigroup). Lower-rank candidates are preferred, so a degenerate
    /// stationary space is returned as a basis of extremal states where
    /// possible. Every returned state is Hermitian, trace one and satisfies
    /// `‖𝓛_tot ρ‖_F ≤ tol·max(1, ‖𝓛_tot‖_F)`.
    pub fn stationary_states(&self, tol: f64) -> Result<Vec<DensityMatrix>> {
        let d = self.dim();
        let liouvillian = self.liouvillian();
        let kernel = liouvillian.null_space(NULL_SPACE_RTOL);

        let mut hermitian = Vec::new();
        for k in &kernel {
            let kd = k.adjoint();
            hermitian.push((k + &kd) * re(0.5));
            hermitian.push((k - &kd) * crate::linalg::c(0.0, -0.5));
        }

        let mut candidates: Vec<(usize, CMatrix)> = Vec::new();
        for h in &hermitian {
            let (values, vectors) = hermitian_eigen(h);
            let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if scale <= 1e-12 {
                continue;
            }
            for sign in [1.0, -1.0] {
                let mut part = CMatrix::zeros(d, d);
                let mut rank = 0;
                for (k, &v) in values.iter().enumerate() {
                    let v = sign * v;
                    if v > 1e-9 * scale {
                        let col = vectors.column(k);
                        part += &col * col.adjoint() * re(v);
                        rank += 1;
                    }
                }
                let tr = trace(&part).re;
                if rank > 0 && tr > 1e-9 * scale {
                    candidates.push((rank, part / re(tr)));
                }
            }
        }
        candidates.sort_by_key(|(rank, _)| *rank);

        // Greedy linearly independent subset (Gram-Schmidt on vec(ρ)).
        let mut chosen: Vec<DensityMatrix> = Vec::new();
        let mut ortho: Vec<crate::linalg::CVector> = Vec::new();
        let residual_scale = liouvillian.norm().max(1.0);
        for (_, rho) in candidates {
            if chosen.len() == kernel.len() {
                break;
            }
            let mut v = vec(&rho);
            for q in &ortho {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
            let n = v.norm();
            if n <= 1e-6 * vec(&rho).norm() {
                continue;
            }
            let residual = liouvillian.apply(&rho)?.norm();
            if residual > tol * residual_scale {
                continue;
            }
            ortho.push(v / re(n));
            let rho = DensityMatrix::new((&rho + rho.adjoint()) * re(0.5))?;
            if rho.min_eigenvalue() < -TOL_PSD {
                continue;
            }
            chosen.push(rho);
        }
        if chosen.is_empty() {
            return Err(Error::NoStationaryState);
        }
        Ok(chosen)
    }
}

/// Generator written in a fixed Hermitian operator basis `{λ_j}`:
/// `𝓛ρ = −½ Σ_ij a_ij ({λ_i λ_j, ρ} − 2 λ_j ρ λ_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KossakowskiForm {
    basis: Vec<Operator>,
    coefficients: CMatrix,
}

impl KossakowskiForm {
    pub fn new(basis: Vec<Operator>, coefficients: CMatrix) -> Result<Self> {
        let m = basis.len();
        if coefficients.nrows() != m || coefficients.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, found: coefficients.nrows() });
        }
        let d = basis.first().map(Operator::dim).ok_or_else(|| {
            Error::InvalidArgument("Kossakowski basis must be non-empty".into())
        })?;
        if let Some(l) = basis.iter().find(|l| l.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: l.dim() });
        }
        if basis.iter().any(|l| !l.is_hermitian(TOL_HERM)) {
            return Err(Error::InvalidArgument("Kossakowski basis must be Hermitian".into()));
        }
        if !crate::linalg::is_hermitian(&coefficients, TOL_HERM) {
            return Err(Error::InvalidArgument("Kossakowski matrix must be Hermitian".into()));
        }
        Ok(KossakowskiForm { basis, coefficients })
    }

    /// Expansion coefficients `c_kj` with `L_k = Σ_j c_kj λ_j` (an `N × m` matrix).
    pub fn expansion_coefficients(lindblads: &[Operator], basis: &[Operator]) -> Result<CMatrix> {
        let m = basis.len();
        let mut c = CMatrix::zeros(lindblads.len(), m);
        for (k, l) in lindblads.iter().enumerate() {
            let coeffs = expand_in_basis(l, basis, 1e-10)?;
            for (j, z) in coeffs.into_iter().enumerate() {
                c[(k, j)] = z;
            }
        }
        Ok(c)
    }

    /// `a = c†c`, i.e. `a_ij = Σ_k c*_ki c_kj`.
    pub fn from_lindblads(lindblads: &[Operator], basis: Vec<Operator>) -> Result<Self> {
        let c = Self::expansion_coefficients(lindblads, &basis)?;
        KossakowskiForm::new(basis, c.adjoint() * c)
    }

    pub fn basis(&self) -> &[Operator] {
        &self.basis
    }

    pub fn coefficients(&self) -> &CMatrix {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.basis[0].dim()
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for (i, li) in self.basis.iter().enumerate() {
            for (j, lj) in self.basis.iter().enumerate() {
                let a = self.coefficients[(i, j)];
                if a.norm() == 0.0 {
                    continue;
                }
                let (li, lj) = (li.matrix(), lj.matrix());
                let lilj = li * lj;
                let term = (&lilj * rho + rho * &lilj) - lj * rho * li * re(2.0);
                out -= term * (a * 0.5);
            }
        }
        out
    }

    pub fn dissipator_superop(&self) -> SuperOp {
        SuperOp::from_map(self.dim(), |r| self.apply(r))
    }

    /// Diagonal GKLS operators `L_k = √γ_k Σ_j U_kj λ_j` from `a = Σ_k γ_k U*_ki U_kj`.
    /// Fails if `a` has an eigenvalue below `−tol`.
    pub fn to_lindblads(&self, tol: f64) -> Result<Vec<Operator>> {
        let (gammas, v) = hermitian_eigen_desc(&self.coefficients, 1e-12);
        let scale = gammas.first().copied().unwrap_or(0.0).abs().max(1.0);
        if let Some(&g) = gammas.iter().find(|&&g| g < -tol * scale) {
            return Err(Error::NotPositive(g));
        }
        let d = self.dim();
        let mut out = Vec::new();
        for (k, &g) in gammas.iter().enumerate() {
            if g <= tol * scale {
                continue;
            }
            let mut l = CMatrix::zeros(d, d);
            for (j, lam) in self.basis.iter().enumerate() {
                // U = V†, so U_kj = conj(V_jk).
                l += lam.matrix() * v[(j, k)].conj();
            }
            out.push(Operator::new(l * re(g.sqrt()))?);
        }
        Ok(out)
    }
}
