//! Dephasing vs. decay.
//!
//! A single channel `ρ ↦ LρL† − ½{L†L, ρ}` is dephasing iff it has a stable
//! basis, which happens iff `L` is normal; it is self-dual iff
//! `L† = e^{iα} L`. A self-dual multichannel generator can always be rewritten
//! with Hermitian GKLS operators `X_k`, `Y_k` where `L_k = X_k + iY_k`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::{GklsGenerator, TOL_SUPEROP};
use crate::linalg::{re, C64, CMatrix, Operator, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ChannelKind {
    Dephasing,
    Decay,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChannelVerdict {
    pub kind: ChannelKind,
    /// Eigenbasis of a normal `L`. Not unique when `L` has degenerate
    /// eigenvalues: any orthonormal basis of each eigenspace is stable.
    pub stable_basis: Option<Vec<StateVector>>,
    pub self_dual_phase: Option<f64>,
    /// `max_n ‖𝓛(|e_n⟩⟨e_n|)‖_F` over the stable basis.
    pub stable_basis_residual: Option<f64>,
}

/// Outcome of fitting `L† = e^{iα} L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelfDualPhase {
    /// `α ∈ (−π, π]`.
    Phase(f64),
    NotSelfDual,
    /// `L = 0`: every phase fits.
    Degenerate,
}

impl SelfDualPhase {
    pub fn phase(self) -> Option<f64> {
        match self {
            SelfDualPhase::Phase(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    pub generator_self_dual: bool,
    pub per_channel: Vec<ChannelVerdict>,
    pub hermitian_decomposition: Option<Vec<Operator>>,
    pub classical_noise_dilation: bool,
    /// Pairwise `[L_j, L_k] = 0`. Even then, no joint stable basis is claimed.
    pub channels_mutually_commuting: bool,
    /// `H₂ˢ = 0`, equivalently every `L_k` Hermitian.
    pub stratonovich_hermitian: bool,
}

/// Single-channel generator `𝓛(ρ) = LρL† − ½{L†L, ρ}` applied to `ρ`.
fn single_channel(l: &CMatrix, rho: &CMatrix) -> CMatrix {
    let ld = l.adjoint();
    let ldl = &ld * l;
    l * rho * &ld - (&ldl * rho + rho * &ldl) * re(0.5)
}

pub fn classify_single(l: &Operator, tol: f64) -> ChannelVerdict {
    let self_dual_phase = self_dual_phase(l, tol).phase();
    if !l.is_normal(tol) {
        return ChannelVerdict {
            kind: ChannelKind::Decay,
            stable_basis: None,
            self_dual_phase,
            stable_basis_residual: None,
        };
    }
    // The Schur form of a normal matrix is diagonal, so Q holds an eigenbasis.
    let (q, _) = l.schur();
    let basis: Vec<StateVector> = q
        .column_iter()
        .map(|col| StateVector::new(col.into_owned()).expect("finite Schur vectors"))
        .collect();
    let residual = basis
        .iter()
        .map(|e| single_channel(l.matrix(), &e.outer()).norm())
        .fold(0.0, f64::max);
    ChannelVerdict {
        kind: ChannelKind::Dephasing,
        stable_basis: Some(basis),
        self_dual_phase,
        stable_basis_residual: Some(residual),
    }
}

/// Fits `α` from the largest-magnitude entry, `e^{iα} = (L†)_pq / L_pq`, then
/// checks `‖L† − e^{iα}L‖_F ≤ tol·‖L‖_F` on the whole matrix.
pub fn self_dual_phase(l: &Operator, tol: f64) -> SelfDualPhase {
    let m = l.matrix();
    let norm = m.norm();
    if norm == 0.0 || !norm.is_finite() {
        return SelfDualPhase::Degenerate;
    }
    let d = l.dim();
    let (mut p, mut q, mut best) = (0, 0, -1.0);
    for r in 0..d {
        for s in 0..d {
            let v = m[(r, s)].norm();
            if v > best {
                (p, q, best) = (r, s, v);
            }
        }
    }
    let ratio = m[(q, p)].conj() / m[(p, q)];
    let mut alpha = ratio.arg();
    if alpha <= -PI {
        alpha += 2.0 * PI;
    }
    let phase = C64::from_polar(1.0, alpha);
    if (m.adjoint() - m * phase).norm() <= tol * norm {
        SelfDualPhase::Phase(alpha)
    } else {
        SelfDualPhase::NotSelfDual
    }
}

/// Adds `h` to the list, merging it into an existing parallel operator
/// (`A ∥ H` ⇒ one channel with rate `‖A‖² + ‖H‖²`).
fn push_merged(out: &mut Vec<Operator>, h: Operator) {
    let hn = h.norm();
    for a in out.iter_mut() {
        let an = a.norm();
        let overlap = crate::linalg::trace(&(a.matrix() * h.matrix())).re;
        if (overlap.abs() - an * hn).abs() <= 1e-12 * an * hn {
            let scale = (an * an + hn * hn).sqrt() / an;
            *a = scale * &*a;
            return;
        }
    }
    out.push(h);
}

/// Hermitian GKLS operators `{X_k, Y_k}` (with `L_k = X_k + iY_k`) generating
/// the symmetrized dissipator `½(𝓛 + 𝓛^♯)`, which equals `𝓛` when the
/// generator is self-dual.
///
/// Zero members are dropped and parallel members merged into a single channel.
pub fn decompose_self_dual(g: &GklsGenerator, tol: f64) -> Result<Vec<Operator>> {
    if !g.is_self_dual(tol) {
        return Err(Error::NotSelfDual);
    }
    let scale = g.lindblads().iter().map(Operator::norm).fold(0.0, f64::max).max(1.0);
    let mut out = Vec::new();
    for l in g.lindblads() {
        let (x, y) = l.hermitian_parts();
        for h in [x, y] {
            if h.norm() > 1e-14 * scale {
                push_merged(&mut out, h);
            }
        }
    }
    Ok(out)
}

fn mutually_commuting(ls: &[Operator], tol: f64) -> bool {
    ls.iter().enumerate().all(|(j, a)| {
        ls[j + 1..].iter().all(|b| {
            let comm = a.commutator(b).expect("same dimension");
            comm.norm() <= tol * (a.norm() * b.norm()).max(1.0)
        })
    })
}

/// Per-channel verdicts plus the generator-level self-duality chain.
///
/// Errors only on an internal inconsistency: a self-dual generator whose
/// Hermitian decomposition does not rebuild the dissipator.
pub fn classify_generator(g: &GklsGenerator, tol: f64) -> Result<ClassificationReport> {
    let generator_self_dual = g.is_self_dual(TOL_SUPEROP.max(tol));
    let per_channel = g.lindblads().iter().map(|l| classify_single(l, tol)).collect();
    let stratonovich_hermitian = g.to_stratonovich().has_hermitian_noise(tol);

    let hermitian_decomposition = if generator_self_dual {
        let parts = decompose_self_dual(g, TOL_SUPEROP.max(tol))?;
        let rebuilt = GklsGenerator::dissipative(g.dim(), parts.clone())?;
        let target = g.dissipator_superop();
        let err = (&rebuilt.dissipator_superop() - &target).norm();
        if err > TOL_SUPEROP * target.norm().max(1.0) {
            return Err(Error::Inconsistent(format!(
                "self-dual generator but decomposition misses by {err:e}"
            )));
        }
        if let Some(bad) = parts.iter().position(|p| !p.is_hermitian(tol.max(1e-12))) {
            return Err(Error::Inconsistent(format!("decomposition member {bad} is not Hermitian")));
        }
        Some(parts)
    } else {
        None
    };

    Ok(ClassificationReport {
        generator_self_dual,
        per_channel,
        classical_noise_dilation: hermitian_decomposition.is_some(),
        hermitian_decomposition,
        channels_mutually_commuting: mutually_commuting(g.lindblads(), tol.max(1e-12)),
        stratonovich_hermitian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ops::*;
    use crate::linalg::{c, ONE, I, TOL_HERM};
    use approx::assert_abs_diff_eq;

    const TOL: f64 = 1e-10;

    #[test]
    fn classify_single_examples() {
        let v = classify_single(&pauli(3), TOL);
        assert_eq!(v.kind, ChannelKind::Dephasing);
        let basis = v.stable_basis.unwrap();
        for e in &basis {
            let p = e.amplitudes().iter().map(|z| z.norm_sqr()).collect::<Vec<_>>();
            assert!(p.iter().any(|&x| (x - 1.0).abs() < 1e-12));
        }
        assert!(v.stable_basis_residual.unwrap() < 1e-12);
        assert_eq!(v.self_dual_phase, Some(0.0));

        let v = classify_single(&sigma_minus(), TOL);
        assert_eq!(v.kind, ChannelKind::Decay);
        assert!(v.stable_basis.is_none());
        assert!(v.self_dual_phase.is_none());

        let v = classify_single(&Operator::diag(&[ONE, I]), TOL);
        assert_eq!(v.kind, ChannelKind::Dephasing);
        assert!(v.self_dual_phase.is_none());
        let g = GklsGenerator::dissipative(2, vec![Operator::diag(&[ONE, I])]).unwrap();
        assert!(!g.is_self_dual(TOL_SUPEROP));
    }

    #[test]
    fn self_dual_phase_examples() {
        assert_eq!(self_dual_phase(&pauli(3), TOL), SelfDualPhase::Phase(0.0));
        let a = self_dual_phase(&(I * &pauli(1)), TOL).phase().unwrap();
        assert_abs_diff_eq!(a, PI, epsilon = 1e-15);
        assert_eq!(self_dual_phase(&Operator::diag(&[ONE, I]), TOL), SelfDualPhase::NotSelfDual);
        assert_eq!(self_dual_phase(&Operator::zeros(2), TOL), SelfDualPhase::Degenerate);
    }

    #[test]
    fn gauge_shifts_phase() {
        let x = Operator::from_rows(2, &[re(0.4), c(0.3, -0.2), c(0.3, 0.2), re(-1.0)]).unwrap();
        for theta in [0.3, 1.1, -2.0, 3.0] {
            let l = C64::from_polar(1.0, theta) * &x;
            let a = self_dual_phase(&l, TOL).phase().unwrap();
            let expected = -2.0 * theta;
            let diff = (a - expected).rem_euclid(2.0 * PI);
            assert!(diff < 1e-12 || (2.0 * PI - diff) < 1e-12, "theta={theta} alpha={a}");
        }
    }

    #[test]
    fn decompose_examples() {
        let cc = 0.9;
        let g = GklsGenerator::dissipative(2, vec![cc * &sigma_minus(), cc * &sigma_plus()]).unwrap();
        let parts = decompose_self_dual(&g, TOL_SUPEROP).unwrap();
        assert_eq!(parts.len(), 2);
        let s = cc / 2f64.sqrt();
        let up_to_sign = |a: &Operator, b: &Operator| (a - b).norm() < 1e-14 || (a + b).norm() < 1e-14;
        assert!(up_to_sign(&parts[0], &(s * &pauli(1))));
        assert!(up_to_sign(&parts[1], &(s * &pauli(2))));
        let rebuilt = GklsGenerator::dissipative(2, parts).unwrap();
        assert!((&rebuilt.dissipator_superop() - &g.dissipator_superop()).norm() < 1e-14);

        let gamma: f64 = 0.3;
        let g = GklsGenerator::dissipative(2, vec![gamma.sqrt() * &pauli(3)]).unwrap();
        let parts = decompose_self_dual(&g, TOL_SUPEROP).unwrap();
        assert_eq!(parts, vec![gamma.sqrt() * &pauli(3)]);

        let g = GklsGenerator::dissipative(2, vec![sigma_minus()]).unwrap();
        assert!(matches!(decompose_self_dual(&g, TOL_SUPEROP), Err(Error::NotSelfDual)));
    }

    fn thermal(down: f64, up: f64, gamma: f64) -> GklsGenerator {
        GklsGenerator::new(
            0.5 * &pauli(3),
            vec![down.sqrt() * &sigma_minus(), up.sqrt() * &sigma_plus(), gamma.sqrt() * &pauli(3)],
        )
        .unwrap()
    }

    #[test]
    fn classify_generator_examples() {
        let g = GklsGenerator::new(0.0 * &pauli(1), vec![pauli(3)]).unwrap();
        let r = classify_generator(&g, TOL).unwrap();
        assert!(r.generator_self_dual && r.classical_noise_dilation);
        assert_eq!(r.per_channel.len(), 1);
        assert_eq!(r.per_channel[0].kind, ChannelKind::Dephasing);
        assert!(r.stratonovich_hermitian);

        let r = classify_generator(&thermal(2.0, 1.0, 0.2), TOL).unwrap();
        assert!(!r.generator_self_dual && !r.classical_noise_dilation);
        assert!(r.hermitian_decomposition.is_none());
        let kinds: Vec<_> = r.per_channel.iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ChannelKind::Decay, ChannelKind::Decay, ChannelKind::Dephasing]);
        assert!(!r.stratonovich_hermitian);
        assert!(!r.channels_mutually_commuting);

        // Equal up/down rates (infinite temperature) is self-dual.
        let r = classify_generator(&thermal(1.0, 1.0, 0.2), TOL).unwrap();
        assert!(r.generator_self_dual && r.classical_noise_dilation);
        for h in r.hermitian_decomposition.unwrap() {
            assert!(h.is_hermitian(TOL_HERM));
        }

        let r = classify_generator(&GklsGenerator::dissipative(3, vec![]).unwrap(), TOL).unwrap();
        assert!(r.generator_self_dual && r.classical_noise_dilation);
        assert_eq!(r.hermitian_decomposition.unwrap().len(), 0);
        assert!(r.channels_mutually_commuting);
    }

    #[test]
    fn degenerate_normal_operator_still_certified() {
        let l = Operator::diag(&[ONE, ONE, c(0.0, 2.0)]);
        let v = classify_single(&l, TOL);
        assert_eq!(v.kind, ChannelKind::Dephasing);
        assert!(v.stable_basis_residual.unwrap() < 1e-12);
    }
}
