//! Scenario documents and the built-in model zoo.
//!
//! A scenario is a JSON document. Complex numbers are `[re, im]` pairs and
//! custom matrices are row-major lists of rows. Qubit operators use the basis
//! `(|excited⟩, |ground⟩)` with `σ₃|excited⟩ = +|excited⟩` and
//! `σ₋|excited⟩ = |ground⟩`; oscillator operators act on Fock states
//! `|0⟩ … |d−1⟩` with `a|n⟩ = √n|n−1⟩`.
//!
//! Qubit zoo models:
//!
//! | name | `H₁` | `L_k` |
//! |---|---|---|
//! | `phase_damping_qubit` | `Ωσ₁` | `√γ σ₃` |
//! | `energy_damping_qubit` | `(Ω/2)σ₃` | `√γ′ σ₋` |
//! | `thermal_qubit` | `(Ω/2)σ₃` | `√(γ′(1+n)) σ₋`, `√(γ′n) σ₊`, `√γ σ₃` |
//!
//! and their oscillator analogues with `H₁ = Ω a†a`, channels `√γ N`,
//! `√γ′ a` and `{√(γ′(1+n)) a, √(γ′n) a†, √γ N}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GklsGenerator;
use crate::linalg::{c, ops, re, CMatrix, CVector, DensityMatrix, Operator, StateVector, C64};
use crate::trajectory::{Scheme, SsePlan};

/// Populations of the top Fock level above this fraction trigger a warning.
pub const LEAKAGE_WARNING: f64 = 0.01;

pub const BUILTIN_NAMES: [&str; 7] = [
    "phase_damping_qubit",
    "energy_damping_qubit",
    "thermal_qubit",
    "thermal_qubit_jump_phases",
    "osc_phase_damping",
    "osc_energy_damping",
    "osc_thermal",
];

fn one() -> [f64; 2] {
    [1.0, 0.0]
}

fn cx(z: [f64; 2]) -> C64 {
    c(z[0], z[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Pauli {
        index: usize,
        #[serde(default = "one")]
        coefficient: [f64; 2],
    },
    SigmaPlus {
        #[serde(default = "one")]
        coefficient: [f64; 2],
    },
    SigmaMinus {
        #[serde(default = "one")]
        coefficient: [f64; 2],
    },
    Annihilation {
        #[serde(default = "one")]
        coefficient: [f64; 2],
    },
    Creation {
        #[serde(default = "one")]
        coefficient: [f64; 2],
    },
    Number {
        #[serde(default = "one")]
        coefficient: [f64; 2],
    },
    Custom {
        matrix: Vec<Vec<[f64; 2]>>,
        #[serde(default = "one")]
        coefficient: [f64; 2],
    },
}

impl OperatorSpec {
    pub fn coefficient(&self) -> C64 {
        match self {
            OperatorSpec::Pauli { coefficient, .. }
            | OperatorSpec::SigmaPlus { coefficient }
            | OperatorSpec::SigmaMinus { coefficient }
            | OperatorSpec::Annihilation { coefficient }
            | OperatorSpec::Creation { coefficient }
            | OperatorSpec::Number { coefficient }
            | OperatorSpec::Custom { coefficient, .. } => cx(*coefficient),
        }
    }

    fn is_qubit_kind(&self) -> bool {
        matches!(self, OperatorSpec::Pauli { .. } | OperatorSpec::SigmaPlus { .. } | OperatorSpec::SigmaMinus { .. })
    }

    fn is_oscillator_kind(&self) -> bool {
        matches!(self, OperatorSpec::Annihilation { .. } | OperatorSpec::Creation { .. } | OperatorSpec::Number { .. })
    }

    pub fn build(&self, dim: usize, fock_levels: Option<usize>) -> Result<Operator> {
        if self.is_qubit_kind() && dim != 2 {
            return Err(Error::Scenario(format!("qubit operator in a {dim}-dimensional scenario")));
        }
        if self.is_oscillator_kind() && fock_levels.is_none() {
            return Err(Error::Scenario("oscillator operator requires fock_levels".into()));
        }
        let base = match self {
            OperatorSpec::Pauli { index, .. } => {
                if *index > 3 {
                    return Err(Error::Scenario(format!("Pauli index {index} out of range 0..=3")));
                }
                ops::pauli(*index)
            }
            OperatorSpec::SigmaPlus { .. } => ops::sigma_plus(),
            OperatorSpec::SigmaMinus { .. } => ops::sigma_minus(),
            OperatorSpec::Annihilation { .. } => ops::annihilation(dim),
            OperatorSpec::Creation { .. } => ops::creation(dim),
            OperatorSpec::Number { .. } => ops::number(dim),
            OperatorSpec::Custom { matrix, .. } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return Err(Error::Scenario(format!("custom matrix must be {dim}x{dim}")));
                }
                let entries: Vec<C64> = matrix.iter().flatten().map(|&z| cx(z)).collect();
                Operator::from_rows(dim, &entries)?
            }
        };
        Ok(self.coefficient() * &base)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Computational basis state `|n⟩`.
    Basis(usize),
    /// Amplitudes, normalized on load.
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub n_traj: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Bound on the ensemble-vs-exact trace distance at every recorded time.
    pub ensemble: f64,
    /// Bound on the distance between the final ensemble state and the unique
    /// stationary state, checked only when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_levels: Option<usize>,
    pub hamiltonian: Vec<OperatorSpec>,
    pub lindblads: Vec<OperatorSpec>,
    pub initial_state: InitialState,
    pub plan: PlanSpec,
    pub tolerances: Tolerances,
    /// Physical parameters the operators were built from (informational).
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Scenario("dim must be positive".into()));
        }
        if let Some(levels) = self.fock_levels {
            if levels < 2 {
                return Err(Error::Scenario("fock_levels must be at least 2".into()));
            }
            if levels != self.dim {
                return Err(Error::Scenario(format!("fock_levels ({levels}) must equal dim ({})", self.dim)));
            }
        }
        for (key, value) in &self.parameters {
            let rate_like = matches!(key.as_str(), "gamma" | "gamma_prime" | "n");
            if rate_like && !(*value >= 0.0) {
                return Err(Error::Scenario(format!("parameter {key} must be non-negative")));
            }
            if key == "beta" && !(*value > 0.0) {
                return Err(Error::Scenario("parameter beta must be positive".into()));
            }
        }
        if self.plan.n_traj == 0 {
            return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
        }
        if !(self.tolerances.ensemble >= 0.0) {
            return Err(Error::Scenario("ensemble tolerance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn is_oscillator(&self) -> bool {
        self.fock_levels.is_some()
    }

    pub fn generator(&self) -> Result<GklsGenerator> {
        self.validate()?;
        let mut h = Operator::zeros(self.dim);
        for term in &self.hamiltonian {
            h = &h + &term.build(self.dim, self.fock_levels)?;
        }
        let ls = self
            .lindblads
            .iter()
            .map(|l| l.build(self.dim, self.fock_levels))
            .collect::<Result<Vec<_>>>()?;
        GklsGenerator::new(h, ls)
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        match &self.initial_state {
            InitialState::Basis(n) if *n < self.dim => Ok(StateVector::basis(self.dim, *n)),
            InitialState::Basis(n) => Err(Error::Scenario(format!("basis state {n} outside dimension {}", self.dim))),
            InitialState::Amplitudes(a) => {
                if a.len() != self.dim {
                    return Err(Error::Scenario(format!("expected {} amplitudes, found {}", self.dim, a.len())));
                }
                let amps: Vec<C64> = a.iter().map(|&z| cx(z)).collect();
                StateVector::from_amplitudes(&amps)?.normalized()
            }
        }
    }

    pub fn initial_density(&self) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_state(&self.initial_state()?))
    }

    pub fn sse_plan(&self) -> Result<SsePlan> {
        let p = &self.plan;
        SsePlan::new(self.generator()?, p.scheme, p.dt, p.t_final, p.record_stride, p.seed)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let scenario: Scenario = serde_json::from_str(&text)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(scenario)? + "\n")?;
    Ok(())
}

/// Loads a builtin by name, or a scenario file otherwise.
pub fn resolve_scenario(name_or_path: &str) -> Result<Scenario> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        return build_scenario(name_or_path);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_scenario(path);
    }
    Err(Error::Scenario(format!("unknown scenario '{name_or_path}' (builtins: {})", BUILTIN_NAMES.join(", "))))
}

/// Mean thermal occupation `1/(e^{βΩ} − 1)`.
pub fn thermal_occupation(beta_omega: f64) -> f64 {
    1.0 / beta_omega.exp_m1()
}

fn real(x: f64) -> [f64; 2] {
    [x, 0.0]
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn plan(scheme: Scheme, dt: f64, t_final: f64, record_stride: usize, n_traj: usize) -> PlanSpec {
    PlanSpec { scheme, dt, t_final, record_stride, n_traj, seed: DEFAULT_SEED }
}

const DEFAULT_SEED: u64 = 2017;

fn plus_state() -> InitialState {
    let s = 0.5f64.sqrt();
    InitialState::Amplitudes(vec![real(s), real(s)])
}

pub fn build_scenario(name: &str) -> Result<Scenario> {
    let s = match name {
        "phase_damping_qubit" => {
            let (gamma, omega) = (0.5, 0.0);
            Scenario {
                name: name.into(),
                dim: 2,
                fock_levels: None,
                hamiltonian: vec![OperatorSpec::Pauli { index: 1, coefficient: real(omega) }],
                lindblads: vec![OperatorSpec::Pauli { index: 3, coefficient: real(f64::sqrt(gamma)) }],
                initial_state: plus_state(),
                plan: plan(Scheme::StratonovichHeun, 1e-3, 2.0, 10, 10_000),
                tolerances: Tolerances { ensemble: 0.05, stationary: None },
                parameters: params(&[("gamma", gamma), ("omega", omega)]),
            }
        }
        "energy_damping_qubit" => {
            let (gamma_prime, omega) = (1.0, 1.0);
            Scenario {
                name: name.into(),
                dim: 2,
                fock_levels: None,
                hamiltonian: vec![OperatorSpec::Pauli { index: 3, coefficient: real(omega / 2.0) }],
                lindblads: vec![OperatorSpec::SigmaMinus { coefficient: real(f64::sqrt(gamma_prime)) }],
                initial_state: plus_state(),
                plan: plan(Scheme::ItoEuler, 1e-3, 8.0, 10, 10_000),
                tolerances: Tolerances { ensemble: 0.05, stationary: Some(0.05) },
                parameters: params(&[("gamma_prime", gamma_prime), ("omega", omega)]),
            }
        }
        "thermal_qubit" | "thermal_qubit_jump_phases" => thermal_qubit(name == "thermal_qubit_jump_phases"),
        "osc_phase_damping" => {
            let (gamma, omega, levels) = (0.25, 1.0, 12);
            let s = 0.5f64.sqrt();
            let mut amps = vec![real(0.0); levels];
            amps[0] = real(s);
            amps[2] = real(s);
            Scenario {
                name: name.into(),
                dim: levels,
                fock_levels: Some(levels),
                hamiltonian: vec![OperatorSpec::Number { coefficient: real(omega) }],
                lindblads: vec![OperatorSpec::Number { coefficient: real(f64::sqrt(gamma)) }],
                initial_state: InitialState::Amplitudes(amps),
                plan: plan(Scheme::StratonovichHeun, 1e-3, 2.0, 10, 2_000),
                tolerances: Tolerances { ensemble: 0.05, stationary: None },
                parameters: params(&[("gamma", gamma), ("omega", omega)]),
            }
        }
        "osc_energy_damping" => {
            let (gamma_prime, omega, levels) = (1.0, 1.0, 12);
            Scenario {
                name: name.into(),
                dim: levels,
                fock_levels: Some(levels),
                hamiltonian: vec![OperatorSpec::Number { coefficient: real(omega) }],
                lindblads: vec![OperatorSpec::Annihilation { coefficient: real(f64::sqrt(gamma_prime)) }],
                initial_state: InitialState::Basis(2),
                plan: plan(Scheme::ItoEuler, 1e-3, 2.0, 10, 10_000),
                tolerances: Tolerances { ensemble: 0.05, stationary: None },
                parameters: params(&[("gamma_prime", gamma_prime), ("omega", omega)]),
            }
        }
        "osc_thermal" => {
            let (gamma_prime, gamma, omega, n, levels) = (1.0, 0.05, 1.0, 0.5, 12);
            Scenario {
                name: name.into(),
                dim: levels,
                fock_levels: Some(levels),
                hamiltonian: vec![OperatorSpec::Number { coefficient: real(omega) }],
                lindblads: vec![
                    OperatorSpec::Annihilation { coefficient: real(f64::sqrt(gamma_prime * (1.0 + n))) },
                    OperatorSpec::Creation { coefficient: real(f64::sqrt(gamma_prime * n)) },
                    OperatorSpec::Number { coefficient: real(f64::sqrt(gamma)) },
                ],
                initial_state: InitialState::Basis(2),
                // Norm fluctuations of the linear unravelling grow quickly for
                // thermal oscillator noise, so the ensemble window is short.
                plan: plan(Scheme::ItoEuler, 1e-3, 0.3, 10, 10_000),
                tolerances: Tolerances { ensemble: 0.05, stationary: None },
                parameters: params(&[("gamma_prime", gamma_prime), ("gamma", gamma), ("omega", omega), ("n", n)]),
            }
        }
        other => {
            return Err(Error::Scenario(format!(
                "unknown builtin '{other}' (builtins: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(s)
}

/// Thermal two-level atom with `βΩ = ln 2` (so `n = 1`), `γ′ = 1`, `γ = 0.2`.
///
/// With `jump_phases` the two jump operators carry the factor `−i`, which
/// leaves the generator unchanged.
fn thermal_qubit(jump_phases: bool) -> Scenario {
    let (omega, gamma_prime, gamma) = (1.0, 1.0, 0.2);
    let beta = std::f64::consts::LN_2 / omega;
    let n = thermal_occupation(beta * omega);
    let phase = |x: f64| if jump_phases { [0.0, -x] } else { real(x) };
    Scenario {
        name: if jump_phases { "thermal_qubit_jump_phases" } else { "thermal_qubit" }.into(),
        dim: 2,
        fock_levels: None,
        hamiltonian: vec![OperatorSpec::Pauli { index: 3, coefficient: real(omega / 2.0) }],
        lindblads: vec![
            OperatorSpec::SigmaMinus { coefficient: phase(f64::sqrt(gamma_prime * (1.0 + n))) },
            OperatorSpec::SigmaPlus { coefficient: phase(f64::sqrt(gamma_prime * n)) },
            OperatorSpec::Pauli { index: 3, coefficient: real(f64::sqrt(gamma)) },
        ],
        initial_state: InitialState::Basis(0),
        plan: plan(Scheme::ItoEuler, 1e-3, 2.0, 10, 10_000),
        tolerances: Tolerances { ensemble: 0.05, stationary: Some(0.05) },
        parameters: params(&[("omega", omega), ("beta", beta), ("gamma_prime", gamma_prime), ("gamma", gamma), ("n", n)]),
    }
}

/// Gibbs state `(P₋ + e^{−βΩ}P₊)/(1 + e^{−βΩ})` in the `(excited, ground)` basis.
pub fn qubit_gibbs_state(beta_omega: f64) -> DensityMatrix {
    let w = (-beta_omega).exp();
    let z = 1.0 + w;
    let m = CMatrix::from_diagonal(&CVector::from_column_slice(&[re(w / z), re(1.0 / z)]));
    DensityMatrix::new(m).expect("square")
}

/// Population of the highest Fock level.
pub fn leakage(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    rho.matrix()[(d - 1, d - 1)].re
}
