//! Deterministic random operators shared by the integration tests.
#![allow(dead_code)]

use gkls_sse::generator::GklsGenerator;
use gkls_sse::linalg::{c, re, CMatrix, CVector, Operator};
use gkls_sse::noise::NoiseStream;

pub struct Sampler(NoiseStream);

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler(NoiseStream::from_seed(seed))
    }

    pub fn normal(&mut self) -> f64 {
        self.0.standard_normal()
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.uniform()
    }

    /// Integer in `lo..=hi`.
    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + ((self.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo)
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| c(self.0.standard_normal(), self.0.standard_normal()))
    }

    pub fn general(&mut self, d: usize) -> Operator {
        Operator::new(self.matrix(d, d)).unwrap()
    }

    pub fn hermitian(&mut self, d: usize) -> Operator {
        let m = self.matrix(d, d);
        Operator::new((&m + m.adjoint()) * re(0.5)).unwrap()
    }

    pub fn unitary(&mut self, d: usize) -> CMatrix {
        self.matrix(d, d).qr().q()
    }

    /// `U diag(z) U†` with complex eigenvalues.
    pub fn normal_op(&mut self, d: usize) -> Operator {
        let u = self.unitary(d);
        let z = CVector::from_fn(d, |_, _| c(self.0.standard_normal(), self.0.standard_normal()));
        Operator::new(&u * CMatrix::from_diagonal(&z) * u.adjoint()).unwrap()
    }

    /// `e^{iφ} X` with `X` Hermitian and a generic phase.
    pub fn phased_hermitian(&mut self, d: usize) -> Operator {
        let phi = 0.3 + 2.0 * self.uniform();
        self.hermitian(d).scale(c(phi.cos(), phi.sin()))
    }

    /// Generators cycling through Hermitian, phased-Hermitian, `{A, A†}` pair
    /// and general channel sets, with a random Hamiltonian.
    pub fn generator(&mut self, index: usize) -> GklsGenerator {
        let d = self.int(2, 4);
        let k = self.int(1, 3);
        let ls: Vec<Operator> = match index % 4 {
            0 => (0..k).map(|_| self.hermitian(d)).collect(),
            1 => (0..k).map(|_| self.phased_hermitian(d)).collect(),
            2 => {
                let a = self.general(d);
                vec![a.dagger(), a]
            }
            _ => (0..k).map(|_| self.general(d)).collect(),
        };
        GklsGenerator::new(self.hermitian(d), ls).unwrap()
    }

    /// A general, normal or phased-Hermitian operator, cycling by index.
    pub fn single_channel(&mut self, index: usize) -> Operator {
        let d = self.int(2, 4);
        match index % 3 {
            0 => self.general(d),
            1 => self.normal_op(d),
            _ => self.phased_hermitian(d),
        }
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
