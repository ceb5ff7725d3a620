//! Linear stochastic Schrödinger equations driven by real Wiener noise.
//!
//! All three schemes work on un-normalized states. The Ito drift uses
//! `H₂ = ½ Σ L_k†L_k`, so probability is conserved only on average; the
//! exact-unitary scheme conserves it on every path but needs Hermitian `L_k`.
//!
//! Trajectory `i` of an ensemble draws from [`NoiseStream::child`]`(seed, i)`.
//! Ensemble sums are reduced over a fixed binary tree of trajectory indices, so
//! results are bit-identical for any thread count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{GklsGenerator, StratonovichForm};
use crate::linalg::{re, unitary_from_hermitian, CMatrix, C64, DensityMatrix, Operator, StateVector, I, TOL_HERM, TOL_NORM, ZERO};
use crate::noise::NoiseStream;

/// Trajectories summed sequentially inside one leaf of the reduction tree.
const LEAF: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ItoEuler,
    StratonovichHeun,
    ExactUnitary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SsePlan {
    pub generator: GklsGenerator,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub seed: u64,
}

impl SsePlan {
    pub fn new(
        generator: GklsGenerator,
        scheme: Scheme,
        dt: f64,
        t_final: f64,
        record_stride: usize,
        seed: u64,
    ) -> Result<Self> {
        let plan = SsePlan { generator, scheme, dt, t_final, record_stride, seed };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t_final.is_finite() || self.t_final < self.dt {
            return Err(Error::InvalidArgument(format!(
                "t_final ({}) must be at least dt ({})",
                self.t_final, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidArgument("record_stride must be at least 1".into()));
        }
        if self.scheme == Scheme::ExactUnitary {
            check_hermitian_noise(self.generator.lindblads())?;
        }
        Ok(())
    }

    /// `round(t_final / dt)`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Step indices `0, s, 2s, …` up to `n_steps`.
    pub fn record_steps(&self) -> Vec<usize> {
        (0..=self.n_steps()).step_by(self.record_stride).collect()
    }

    /// Recorded times `k·dt` for each recorded step `k`.
    pub fn record_times(&self) -> Vec<f64> {
        self.record_steps().into_iter().map(|k| k as f64 * self.dt).collect()
    }
}

fn check_hermitian_noise(ls: &[Operator]) -> Result<()> {
    match ls.iter().position(|l| !l.is_hermitian(TOL_HERM)) {
        Some(index) => Err(Error::NonHermitianLindblad { index }),
        None => Ok(()),
    }
}

fn row_major(m: &CMatrix) -> Vec<C64> {
    let d = m.nrows();
    (0..d * d).map(|k| m[(k / d, k % d)]).collect()
}

fn matvec(m: &[C64], x: &[C64], out: &mut [C64]) {
    let d = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * d..(i + 1) * d];
        *o = row.iter().zip(x).fold(ZERO, |acc, (a, b)| acc + a * b);
    }
}

/// Precomputed operators for one scheme, stored row-major.
#[derive(Clone, Debug)]
enum Kernel {
    /// `ψ′ = ψ + Bψ` (Ito) or `ψ′ = ψ + Bψ + ½B²ψ` (Heun), with
    /// `B = drift·dt + Σ_k noise_k dW_k`.
    Linear { heun: bool, drift: Vec<C64>, noise: Vec<Vec<C64>> },
    /// `ψ′ = exp(−i(H₁dt + Σ_k L_k dW_k))ψ`.
    Unitary { h1: Vec<C64>, ls: Vec<Vec<C64>> },
}

#[derive(Clone, Debug)]
struct Workspace {
    b: Vec<C64>,
    u: Vec<C64>,
    v: Vec<C64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Workspace { b: vec![ZERO; d * d], u: vec![ZERO; d], v: vec![ZERO; d] }
    }
}

impl Kernel {
    fn ito(g: &GklsGenerator) -> Self {
        let drift = (g.hamiltonian().matrix() - g.h2_ito().matrix() * I) * (-I);
        Kernel::Linear { heun: false, drift: row_major(&drift), noise: noise_terms(g.lindblads()) }
    }

    fn heun(s: &StratonovichForm) -> Self {
        let drift = s.effective_hamiltonian() * (-I);
        Kernel::Linear { heun: true, drift: row_major(&drift), noise: noise_terms(&s.lindblads) }
    }

    fn unitary(h1: &Operator, ls: &[Operator]) -> Result<Self> {
        check_hermitian_noise(ls)?;
        Ok(Kernel::Unitary {
            h1: row_major(h1.matrix()),
            ls: ls.iter().map(|l| row_major(l.matrix())).collect(),
        })
    }

    fn for_plan(plan: &SsePlan) -> Result<Self> {
        let g = &plan.generator;
        match plan.scheme {
            Scheme::ItoEuler => Ok(Kernel::ito(g)),
            Scheme::StratonovichHeun => Ok(Kernel::heun(&g.to_stratonovich())),
            Scheme::ExactUnitary => Kernel::unitary(g.hamiltonian(), g.lindblads()),
        }
    }

    fn n_noises(&self) -> usize {
        match self {
            Kernel::Linear { noise, .. } => noise.len(),
            Kernel::Unitary { ls, .. } => ls.len(),
        }
    }

    fn step(&self, psi: &mut [C64], dw: &[f64], dt: f64, ws: &mut Workspace) {
        let d = psi.len();
        let (base, terms) = match self {
            Kernel::Linear { drift, noise, .. } => (drift, noise),
            Kernel::Unitary { h1, ls } => (h1, ls),
        };
        for (b, x) in ws.b.iter_mut().zip(base) {
            *b = x * dt;
        }
        for (term, &w) in terms.iter().zip(dw) {
            for (b, x) in ws.b.iter_mut().zip(term) {
                *b += x * w;
            }
        }
        match self {
            Kernel::Linear { heun, .. } => {
                matvec(&ws.b, psi, &mut ws.u);
                if *heun {
                    matvec(&ws.b, &ws.u, &mut ws.v);
                    for ((p, u), v) in psi.iter_mut().zip(&ws.u).zip(&ws.v) {
                        *p += u + v * 0.5;
                    }
                } else {
                    for (p, u) in psi.iter_mut().zip(&ws.u) {
                        *p += u;
                    }
                }
            }
            Kernel::Unitary { .. } => {
                if d == 2 {
                    unitary_2x2(&mut ws.b);
                } else {
                    let k = CMatrix::from_row_slice(d, d, &ws.b);
                    ws.b = row_major(&unitary_from_hermitian(&k));
                }
                ws.u.copy_from_slice(psi);
                matvec(&ws.b, &ws.u, psi);
            }
        }
    }
}

fn noise_terms(ls: &[Operator]) -> Vec<Vec<C64>> {
    ls.iter().map(|l| row_major(&(l.matrix() * (-I)))).collect()
}

/// Overwrites a Hermitian 2×2 `K` (row-major) with `exp(−iK)`, using
/// `K = a₀𝕀 + a·σ` and `exp(−iK) = e^{−ia₀}(cos r 𝕀 − i sin r (a·σ)/r)`.
fn unitary_2x2(k: &mut [C64]) {
    let a0 = 0.5 * (k[0].re + k[3].re);
    let a3 = 0.5 * (k[0].re - k[3].re);
    let off = 0.5 * (k[1] + k[2].conj());
    let r = (a3 * a3 + off.norm_sqr()).sqrt();
    let (sin_r, cos_r) = r.sin_cos();
    let sinc = if r < 1e-8 { 1.0 - r * r / 6.0 } else { sin_r / r };
    let phase = C64::from_polar(1.0, -a0);
    let s = -I * sinc;
    k[0] = phase * (re(cos_r) + s * a3);
    k[3] = phase * (re(cos_r) - s * a3);
    k[1] = phase * s * off;
    k[2] = phase * s * off.conj();
}

fn check_state(psi: &StateVector, d: usize) -> Result<()> {
    if psi.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: psi.dim() });
    }
    Ok(())
}

fn check_increments(dw: &[f64], n: usize) -> Result<()> {
    if dw.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: dw.len() });
    }
    Ok(())
}

fn apply_kernel(kernel: &Kernel, psi: &StateVector, dw: &[f64], dt: f64) -> Result<StateVector> {
    check_increments(dw, kernel.n_noises())?;
    let mut amps: Vec<C64> = psi.amplitudes().iter().copied().collect();
    let mut ws = Workspace::new(amps.len());
    kernel.step(&mut amps, dw, dt, &mut ws);
    StateVector::from_amplitudes(&amps)
}

/// `ψ′ = ψ + (−iH₁ − H₂)ψ dt − i Σ_k L_k ψ dW_k`.
pub fn ito_step(psi: &StateVector, g: &GklsGenerator, dw: &[f64], dt: f64) -> Result<StateVector> {
    check_state(psi, g.dim())?;
    apply_kernel(&Kernel::ito(g), psi, dw, dt)
}

/// One Heun predictor-corrector step of `dψ = −i(H₁ˢ − iH₂ˢ)ψ dt − i Σ_k L_k ψ ∘ dW_k`.
pub fn stratonovich_step(psi: &StateVector, s: &StratonovichForm, dw: &[f64], dt: f64) -> Result<StateVector> {
    check_state(psi, s.h1s.dim())?;
    apply_kernel(&Kernel::heun(s), psi, dw, dt)
}

/// `ψ′ = exp(−i(H₁dt + Σ_k L_k dW_k))ψ` for Hermitian `L_k`.
pub fn exact_unitary_step(
    psi: &StateVector,
    h1: &Operator,
    ls: &[Operator],
    dw: &[f64],
    dt: f64,
) -> Result<StateVector> {
    check_state(psi, h1.dim())?;
    if let Some(l) = ls.iter().find(|l| l.dim() != h1.dim()) {
        return Err(Error::DimensionMismatch { expected: h1.dim(), found: l.dim() });
    }
    apply_kernel(&Kernel::unitary(h1, ls)?, psi, dw, dt)
}

/// Integrates one path, calling `record(slot, ψ)` at every recorded step.
fn integrate(
    plan: &SsePlan,
    kernel: &Kernel,
    psi0: &StateVector,
    index: u64,
    mut record: impl FnMut(usize, &[C64]),
) {
    let d = psi0.dim();
    let mut stream = NoiseStream::child(plan.seed, index);
    let mut psi: Vec<C64> = psi0.amplitudes().iter().copied().collect();
    let mut ws = Workspace::new(d);
    let mut dw = vec![0.0; kernel.n_noises()];
    let n_steps = plan.n_steps();
    record(0, &psi);
    for step in 1..=n_steps {
        stream.fill_wiener(plan.dt, &mut dw);
        kernel.step(&mut psi, &dw, plan.dt, &mut ws);
        if step % plan.record_stride == 0 {
            record(step / plan.record_stride, &psi);
        }
    }
}

fn check_initial(plan: &SsePlan, psi0: &StateVector) -> Result<()> {
    plan.validate()?;
    check_state(psi0, plan.generator.dim())?;
    if !psi0.is_normalized(TOL_NORM) {
        return Err(Error::InvalidArgument(format!(
            "initial state must be normalized (norm² = {})",
            psi0.norm_sq()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub norms_sq: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

/// Trajectory `index` of the ensemble defined by `plan`.
pub fn run_trajectory(plan: &SsePlan, psi0: &StateVector, index: u64) -> Result<TrajectoryRecord> {
    check_initial(plan, psi0)?;
    let kernel = Kernel::for_plan(plan)?;
    let times = plan.record_times();
    let mut states = Vec::with_capacity(times.len());
    integrate(plan, &kernel, psi0, index, |_, psi| {
        states.push(StateVector::from_amplitudes(psi).expect("finite amplitudes"));
    });
    let norms_sq = states.iter().map(StateVector::norm_sq).collect();
    Ok(TrajectoryRecord { times, states, norms_sq, seed: plan.seed, stream: index })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub n_traj: usize,
    pub times: Vec<f64>,
    /// `(1/M) Σ |ψ⟩⟨ψ|` without per-path renormalization.
    pub rho_series: Vec<DensityMatrix>,
    pub mean_norm_sq: Vec<f64>,
}

impl EnsembleResult {
    /// Wraps an externally computed series, e.g. exact snapshots.
    pub fn from_density_series(n_traj: usize, times: Vec<f64>, rho_series: Vec<DensityMatrix>) -> Result<Self> {
        if times.len() != rho_series.len() {
            return Err(Error::TimeGridMismatch);
        }
        let mean_norm_sq = rho_series.iter().map(|r| r.trace().re).collect();
        Ok(EnsembleResult { n_traj, times, rho_series, mean_norm_sq })
    }
}

struct Sums {
    rho: Vec<C64>,
    norm_sq: Vec<f64>,
}

impl Sums {
    fn zeros(n_rec: usize, d: usize) -> Self {
        Sums { rho: vec![ZERO; n_rec * d * d], norm_sq: vec![0.0; n_rec] }
    }

    fn add(mut self, other: Sums) -> Sums {
        for (a, b) in self.rho.iter_mut().zip(other.rho) {
            *a += b;
        }
        for (a, b) in self.norm_sq.iter_mut().zip(other.norm_sq) {
            *a += b;
        }
        self
    }
}

fn leaf_sums(plan: &SsePlan, kernel: &Kernel, psi0: &StateVector, range: std::ops::Range<usize>, n_rec: usize) -> Sums {
    let d = psi0.dim();
    let mut sums = Sums::zeros(n_rec, d);
    for index in range {
        integrate(plan, kernel, psi0, index as u64, |slot, psi| {
            let block = &mut sums.rho[slot * d * d..(slot + 1) * d * d];
            // Column-major storage of |ψ⟩⟨ψ|.
            for (j, pj) in psi.iter().enumerate() {
                let pj = pj.conj();
                for (i, pi) in psi.iter().enumerate() {
                    block[j * d + i] += pi * pj;
                }
            }
            sums.norm_sq[slot] += psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        });
    }
    sums
}

fn tree_sums(plan: &SsePlan, kernel: &Kernel, psi0: &StateVector, range: std::ops::Range<usize>, n_rec: usize) -> Sums {
    if range.len() <= LEAF {
        return leaf_sums(plan, kernel, psi0, range, n_rec);
    }
    let mid = range.start + range.len() / 2;
    let (left, right) = rayon::join(
        || tree_sums(plan, kernel, psi0, range.start..mid, n_rec),
        || tree_sums(plan, kernel, psi0, mid..range.end, n_rec),
    );
    left.add(right)
}

/// Averages `m` trajectories, trajectory `i` using child stream `i` of `plan.seed`.
pub fn run_ensemble(plan: &SsePlan, psi0: &StateVector, m: usize) -> Result<EnsembleResult> {
    check_initial(plan, psi0)?;
    if m == 0 {
        return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
    }
    let kernel = Kernel::for_plan(plan)?;
    let times = plan.record_times();
    let n_rec = times.len();
    let d = psi0.dim();
    let sums = tree_sums(plan, &kernel, psi0, 0..m, n_rec);
    let inv = 1.0 / m as f64;
    let rho_series = sums
        .rho
        .chunks(d * d)
        .map(|block| DensityMatrix::new(CMatrix::from_column_slice(d, d, block) * re(inv)))
        .collect::<Result<Vec<_>>>()?;
    let mean_norm_sq = sums.norm_sq.iter().map(|s| s * inv).collect();
    Ok(EnsembleResult { n_traj: m, times, rho_series, mean_norm_sq })
}

/// Per-time trace distances between two series on the same grid.
pub fn compare_series(ens: &EnsembleResult, times: &[f64], reference: &[DensityMatrix]) -> Result<Vec<f64>> {
    let same_grid = times.len() == ens.times.len()
        && reference.len() == times.len()
        && ens.times.iter().zip(times).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    if !same_grid {
        return Err(Error::TimeGridMismatch);
    }
    ens.rho_series.iter().zip(reference).map(|(a, b)| a.trace_distance(b)).collect()
}

/// `½‖ρ_ens(t) − exp(t𝓛_tot)ρ₀‖₁` at every recorded time.
pub fn compare_to_exact(ens: &EnsembleResult, g: &GklsGenerator, rho0: &DensityMatrix) -> Result<Vec<f64>> {
    let exact = g.evolve_exact(rho0, &ens.times)?;
    compare_series(ens, &ens.times, &exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ops, ONE};
    use approx::assert_abs_diff_eq;

    fn plus() -> StateVector {
        let s = 0.5f64.sqrt();
        StateVector::from_amplitudes(&[re(s), re(s)]).unwrap()
    }

    fn dissipative(ls: Vec<Operator>) -> GklsGenerator {
        GklsGenerator::dissipative(2, ls).unwrap()
    }

    #[test]
    fn ito_step_examples() {
        let dt = 0.01;
        let w = 0.07;
        let g = dissipative(vec![ops::pauli(3)]);
        let psi = ito_step(&StateVector::basis(2, 0), &g, &[w], dt).unwrap();
        assert_abs_diff_eq!((psi.amplitudes()[0] - c(1.0 - dt / 2.0, -w)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.norm_sq(), (1.0 - dt / 2.0).powi(2) + w * w, epsilon = 1e-15);

        let gp: f64 = 0.8;
        let g = dissipative(vec![gp.sqrt() * &ops::sigma_minus()]);
        let ground = StateVector::basis(2, 1);
        assert_eq!(ito_step(&ground, &g, &[w], dt).unwrap(), ground);
        let psi = ito_step(&StateVector::basis(2, 0), &g, &[w], dt).unwrap();
        assert_abs_diff_eq!((psi.amplitudes()[0] - re(1.0 - gp * dt / 2.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((psi.amplitudes()[1] - c(0.0, -gp.sqrt() * w)).norm(), 0.0, epsilon = 1e-15);

        assert!(ito_step(&StateVector::basis(3, 0), &g, &[w], dt).is_err());
        assert!(ito_step(&ground, &g, &[w, w], dt).is_err());
    }

    #[test]
    fn stratonovich_step_examples() {
        let s = dissipative(vec![ops::pauli(1), ops::pauli(3)]).to_stratonovich();
        assert_eq!(stratonovich_step(&plus(), &s, &[0.0, 0.0], 0.01).unwrap(), plus());

        let psi0 = StateVector::from_amplitudes(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        for dt in [1e-2f64, 1e-3] {
            let w = dt.sqrt();
            let psi = stratonovich_step(&psi0, &s, &[w, -w], dt).unwrap();
            assert!((psi.norm_sq() - 1.0).abs() < 10.0 * dt * dt, "dt {dt}: {}", psi.norm_sq());
        }
    }

    #[test]
    fn exact_unitary_examples() {
        let gamma: f64 = 0.3;
        let w = 0.2;
        let l = gamma.sqrt() * &ops::pauli(3);
        let psi = exact_unitary_step(&plus(), &Operator::zeros(2), &[l.clone()], &[w], 0.01).unwrap();
        let s = 0.5f64.sqrt();
        let a = gamma.sqrt() * w;
        assert_abs_diff_eq!((psi.amplitudes()[0] - C64::from_polar(s, -a)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((psi.amplitudes()[1] - C64::from_polar(s, a)).norm(), 0.0, epsilon = 1e-15);

        let psi = exact_unitary_step(&plus(), &ops::pauli(1), &[l], &[0.0], 0.0).unwrap();
        assert_abs_diff_eq!((psi.amplitudes() - plus().amplitudes()).norm(), 0.0, epsilon = 1e-15);

        let err = exact_unitary_step(&plus(), &Operator::zeros(2), &[ops::sigma_minus()], &[w], 0.01);
        assert!(matches!(err, Err(Error::NonHermitianLindblad { index: 0 })));
    }

    #[test]
    fn closed_form_matches_eigen_route() {
        let k = Operator::from_rows(2, &[re(0.3), c(0.2, -0.7), c(0.2, 0.7), re(-1.1)]).unwrap();
        let mut flat = row_major(k.matrix());
        unitary_2x2(&mut flat);
        let reference = row_major(&unitary_from_hermitian(k.matrix()));
        for (a, b) in flat.iter().zip(&reference) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-14);
        }
        let mut small = vec![re(1e-10), ZERO, ZERO, re(-1e-10)];
        unitary_2x2(&mut small);
        assert_abs_diff_eq!((small[0] - C64::from_polar(1.0, -1e-10)).norm(), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn exact_unitary_in_higher_dimension() {
        let l = ops::number(3);
        let h = &ops::annihilation(3) + &ops::creation(3);
        let psi0 = StateVector::basis(3, 1);
        let psi = exact_unitary_step(&psi0, &h, &[l.clone()], &[0.3], 0.05).unwrap();
        let k = h.matrix() * re(0.05) + l.matrix() * re(0.3);
        let expected = (k * (-I)).exp() * psi0.amplitudes();
        assert_abs_diff_eq!((psi.amplitudes() - expected).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn plan_validation() {
        let g = dissipative(vec![ops::sigma_minus()]);
        assert!(matches!(
            SsePlan::new(g.clone(), Scheme::ExactUnitary, 0.01, 1.0, 1, 0),
            Err(Error::NonHermitianLindblad { index: 0 })
        ));
        assert!(SsePlan::new(g.clone(), Scheme::ItoEuler, 0.0, 1.0, 1, 0).is_err());
        assert!(SsePlan::new(g.clone(), Scheme::ItoEuler, 0.1, 0.01, 1, 0).is_err());
        assert!(SsePlan::new(g.clone(), Scheme::ItoEuler, 0.01, 1.0, 0, 0).is_err());
        let plan = SsePlan::new(g, Scheme::ItoEuler, 0.01, 1.0, 30, 0).unwrap();
        assert_eq!(plan.record_steps(), vec![0, 30, 60, 90]);
    }

    #[test]
    fn dark_state_is_fixed_pathwise() {
        let g = dissipative(vec![ops::sigma_minus()]);
        let plan = SsePlan::new(g, Scheme::ItoEuler, 0.01, 1.0, 10, 3).unwrap();
        let ground = StateVector::basis(2, 1);
        let rec = run_trajectory(&plan, &ground, 0).unwrap();
        assert!(rec.states.iter().all(|s| *s == ground));
    }

    #[test]
    fn record_norms_and_strict_conservation() {
        let g = dissipative(vec![ops::pauli(3)]).with_hamiltonian(ops::pauli(1)).unwrap();
        let plan = SsePlan::new(g, Scheme::ExactUnitary, 1e-3, 1.0, 50, 9).unwrap();
        let rec = run_trajectory(&plan, &plus(), 4).unwrap();
        assert_eq!(rec.times.len(), 21);
        assert_eq!((rec.seed, rec.stream), (9, 4));
        for (s, n) in rec.states.iter().zip(&rec.norms_sq) {
            assert_abs_diff_eq!(s.norm_sq(), *n, epsilon = 1e-14);
            assert!((n - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn ensemble_is_deterministic_and_consistent() {
        let g = dissipative(vec![ops::sigma_minus(), 0.5 * &ops::pauli(3)]);
        let plan = SsePlan::new(g, Scheme::ItoEuler, 1e-2, 0.5, 5, 17).unwrap();
        let a = run_ensemble(&plan, &plus(), 100).unwrap();
        let b = run_ensemble(&plan, &plus(), 100).unwrap();
        assert_eq!(a, b);
        for (rho, n) in a.rho_series.iter().zip(&a.mean_norm_sq) {
            assert!(rho.is_hermitian(1e-10));
            assert_abs_diff_eq!(rho.trace().re, *n, epsilon = 1e-12);
        }
        // Single-trajectory ensemble is that trajectory's projector.
        let one = run_ensemble(&plan, &plus(), 1).unwrap();
        let rec = run_trajectory(&plan, &plus(), 0).unwrap();
        for (rho, psi) in one.rho_series.iter().zip(&rec.states) {
            assert_abs_diff_eq!((rho.matrix() - psi.outer()).norm(), 0.0, epsilon = 1e-15);
        }
        assert!(run_ensemble(&plan, &plus(), 0).is_err());
        let unnormalized = StateVector::from_amplitudes(&[ONE, ONE]).unwrap();
        assert!(run_ensemble(&plan, &unnormalized, 10).is_err());
    }

    #[test]
    fn compare_examples() {
        let g = dissipative(vec![ops::pauli(3)]).with_hamiltonian(ops::pauli(1)).unwrap();
        let rho0 = DensityMatrix::from_state(&plus());
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let exact = g.evolve_exact(&rho0, &times).unwrap();
        let ens = EnsembleResult::from_density_series(1, times.clone(), exact.clone()).unwrap();
        let dist = compare_to_exact(&ens, &g, &rho0).unwrap();
        assert!(dist.iter().all(|&x| x <= 1e-12));
        assert!(matches!(compare_series(&ens, &times[1..], &exact[1..]), Err(Error::TimeGridMismatch)));
    }

    /// Heun paths on a shared Brownian path converge to the exact solution
    /// `exp(−i√γ σ₃ W(T))ψ₀` with order one in `dt`.
    #[test]
    fn heun_pathwise_order_one() {
        let gamma: f64 = 0.5;
        let g = dissipative(vec![gamma.sqrt() * &ops::pauli(3)]);
        let s = g.to_stratonovich();
        let t_final = 1.0;
        let fine = 1usize << 10;
        let levels = [64usize, 128, 256, 512, 1024];
        let n_paths = 40;
        let mut errors = vec![0.0; levels.len()];
        for path in 0..n_paths {
            let mut stream = NoiseStream::child(123, path);
            let mut dw_fine = vec![0.0; fine];
            stream.fill_wiener(t_final / fine as f64, &mut dw_fine);
            let w_total: f64 = dw_fine.iter().sum();
            let exact = exact_unitary_step(&plus(), &Operator::zeros(2), g.lindblads(), &[w_total], t_final).unwrap();
            for (e, &n) in errors.iter_mut().zip(&levels) {
                let dt = t_final / n as f64;
                let mut psi = plus();
                for chunk in dw_fine.chunks(fine / n) {
                    psi = stratonovich_step(&psi, &s, &[chunk.iter().sum()], dt).unwrap();
                }
                *e += (psi.amplitudes() - exact.amplitudes()).norm() / n_paths as f64;
            }
        }
        let xs: Vec<f64> = levels.iter().map(|&n| (t_final / n as f64).ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let slope = fit_slope(&xs, &ys);
        assert!((slope - 1.0).abs() < 0.25, "slope {slope}, errors {errors:?}");
    }

    fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    }
}
