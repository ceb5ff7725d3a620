//! Command-line front end: `classify`, `simulate`, `compare`, `noise-reduce`.
//!
//! Exit codes: 0 when every check passes, 1 on a tolerance failure or an
//! internal inconsistency, 2 on usage or input errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::classifier::{classify_generator, ClassificationReport};
use crate::error::{Error, Result};
use crate::generator::TOL_SUPEROP;
use crate::linalg::{matrix_from_rows, matrix_to_rows, DensityMatrix};
use crate::noise::minimal_reduction;
use crate::scenarios::{leakage, resolve_scenario, Scenario, LEAKAGE_WARNING};
use crate::trajectory::{compare_series, run_ensemble, run_trajectory, EnsembleResult, Scheme};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Default tolerance for classification and the noise-reduction roundtrip.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "gkls-sse", version, about = "Stochastic unravelings and classification of GKLS generators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Tolerance of the command's pass/fail check (ensemble distance for
    /// `compare`, classification for `classify`, roundtrip for `noise-reduce`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Override the scenario time step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,

    /// Override the scenario ensemble size.
    #[arg(long, global = true)]
    pub ntraj: Option<usize>,

    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, default_value = "gkls-out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the channels of a scenario generator.
    Classify { scenario: String },
    /// Run the stochastic ensemble and write the averaged state series.
    Simulate {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the norms of trajectory 0.
        #[arg(long)]
        traj_dump: bool,
    },
    /// Run the ensemble and the exact evolution on the same grid.
    Compare {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Minimal real-noise reduction of a covariance matrix (JSON rows of `[re, im]`).
    NoiseReduce { matrix_file: PathBuf },
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySummary {
    pub scheme: Scheme,
    pub n_traj: usize,
    pub dt: f64,
    pub t_final: f64,
    pub mean_norm_sq_min: f64,
    pub mean_norm_sq_max: f64,
    /// `4/√M`, the allowed deviation of the mean squared norm from one.
    pub weak_conservation_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StationaryComparison {
    pub n_states: usize,
    /// Distances to the stationary state when it is unique.
    pub exact_final_distance: Option<f64>,
    pub ensemble_final_distance: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeakageSummary {
    pub max_ensemble: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_exact: Option<f64>,
    pub threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub classification: ClassificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary: Option<StationaryComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage: Option<LeakageSummary>,
    pub warnings: Vec<String>,
    pub csv_files: Vec<String>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiseReduceReport {
    pub gammas: Vec<f64>,
    pub unitary: Vec<Vec<[f64; 2]>>,
    pub chosen_b: Vec<Vec<[f64; 2]>>,
    pub active_noises: usize,
    pub roundtrip_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Overrides applied on top of the stored scenario.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub dt: Option<f64>,
    pub ntraj: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, scenario: &Scenario) -> Result<Scenario> {
        let mut s = scenario.clone();
        if let Some(dt) = self.dt {
            s.plan.dt = dt;
        }
        if let Some(m) = self.ntraj {
            s.plan.n_traj = m;
        }
        if let Some(seed) = self.seed {
            s.plan.seed = seed;
        }
        if let Some(tol) = self.tol {
            if !(tol >= 0.0) {
                return Err(Error::InvalidArgument(format!("tolerance must be non-negative, got {tol}")));
            }
            s.tolerances.ensemble = tol;
        }
        s.validate()?;
        Ok(s)
    }
}

pub fn cmd_classify(scenario: &Scenario, tol: f64) -> Result<RunReport> {
    let g = scenario.generator()?;
    Ok(RunReport {
        scenario: scenario.name.clone(),
        command: "classify".into(),
        seed: None,
        classification: classify_generator(&g, tol)?,
        trajectory: None,
        stationary: None,
        leakage: None,
        warnings: Vec::new(),
        csv_files: Vec::new(),
        passed: true,
    })
}

fn summary(scenario: &Scenario, ens: &EnsembleResult) -> TrajectorySummary {
    let fold = |init: f64, f: fn(f64, f64) -> f64| ens.mean_norm_sq.iter().copied().fold(init, f);
    TrajectorySummary {
        scheme: scenario.plan.scheme,
        n_traj: ens.n_traj,
        dt: scenario.plan.dt,
        t_final: scenario.plan.t_final,
        mean_norm_sq_min: fold(f64::INFINITY, f64::min),
        mean_norm_sq_max: fold(f64::NEG_INFINITY, f64::max),
        weak_conservation_bound: 4.0 / (ens.n_traj as f64).sqrt(),
        max_distance: None,
        final_distance: None,
        tolerance: None,
    }
}

fn leakage_summary(scenario: &Scenario, ens: &EnsembleResult, exact: Option<&[DensityMatrix]>) -> Option<LeakageSummary> {
    scenario.is_oscillator().then(|| LeakageSummary {
        max_ensemble: ens.rho_series.iter().map(leakage).fold(0.0, f64::max),
        max_exact: exact.map(|e| e.iter().map(leakage).fold(0.0, f64::max)),
        threshold: LEAKAGE_WARNING,
    })
}

fn leakage_warnings(l: &Option<LeakageSummary>) -> Vec<String> {
    let Some(l) = l else { return Vec::new() };
    let worst = l.max_exact.unwrap_or(0.0).max(l.max_ensemble);
    if worst > l.threshold {
        vec![format!("top Fock level population reaches {worst:.3e} (> {:.0}%)", 100.0 * l.threshold)]
    } else {
        Vec::new()
    }
}

/// Output of `simulate`: the report plus the data behind the CSV files.
pub struct Simulation {
    pub report: RunReport,
    pub ensemble: EnsembleResult,
}

pub fn cmd_simulate(scenario: &Scenario, traj_dump: bool, out: Option<&Path>) -> Result<Simulation> {
    let g = scenario.generator()?;
    let plan = scenario.sse_plan()?;
    let psi0 = scenario.initial_state()?;
    let ens = run_ensemble(&plan, &psi0, scenario.plan.n_traj)?;
    let leakage = leakage_summary(scenario, &ens, None);
    let mut csv_files = Vec::new();
    if let Some(dir) = out {
        let path = dir.join(format!("{}_ensemble.csv", scenario.name));
        write_ensemble_csv(&path, &ens, scenario.is_oscillator())?;
        csv_files.push(path.display().to_string());
        if traj_dump {
            let rec = run_trajectory(&plan, &psi0, 0)?;
            let path = dir.join(format!("{}_trajectory.csv", scenario.name));
            let rows = rec.times.iter().zip(&rec.norms_sq).map(|(t, n)| vec![*t, *n]);
            write_csv(&path, &["t", "norm_sq"], rows)?;
            csv_files.push(path.display().to_string());
        }
    }
    let report = RunReport {
        scenario: scenario.name.clone(),
        command: "simulate".into(),
        seed: Some(scenario.plan.seed),
        classification: classify_generator(&g, DEFAULT_TOL)?,
        trajectory: Some(summary(scenario, &ens)),
        stationary: None,
        warnings: leakage_warnings(&leakage),
        leakage,
        csv_files,
        passed: true,
    };
    Ok(Simulation { report, ensemble: ens })
}

pub fn cmd_compare(scenario: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    let g = scenario.generator()?;
    let plan = scenario.sse_plan()?;
    let psi0 = scenario.initial_state()?;
    let rho0 = DensityMatrix::from_state(&psi0);
    let ens = run_ensemble(&plan, &psi0, scenario.plan.n_traj)?;
    let exact = g.evolve_exact(&rho0, &ens.times)?;
    let distances = compare_series(&ens, &ens.times, &exact)?;
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    let final_distance = *distances.last().expect("at least the initial time");
    let tol = scenario.tolerances.ensemble;
    let mut passed = max_distance <= tol;
    let mut warnings = Vec::new();

    let stationary = match g.stationary_states(TOL_SUPEROP) {
        Ok(states) if states.len() == 1 => {
            let target = &states[0];
            let ens_d = ens.rho_series.last().expect("non-empty").trace_distance(target)?;
            let exact_d = exact.last().expect("non-empty").trace_distance(target)?;
            if let Some(t) = scenario.tolerances.stationary {
                passed &= ens_d <= t;
            }
            Some(StationaryComparison {
                n_states: 1,
                exact_final_distance: Some(exact_d),
                ensemble_final_distance: Some(ens_d),
                tolerance: scenario.tolerances.stationary,
            })
        }
        Ok(states) => {
            if scenario.tolerances.stationary.is_some() {
                warnings.push(format!("{} independent stationary states; stationary check skipped", states.len()));
            }
            Some(StationaryComparison {
                n_states: states.len(),
                exact_final_distance: None,
                ensemble_final_distance: None,
                tolerance: scenario.tolerances.stationary,
            })
        }
        Err(Error::NoStationaryState) => {
            warnings.push("no stationary state found".into());
            None
        }
        Err(e) => return Err(e),
    };

    let leakage = leakage_summary(scenario, &ens, Some(&exact));
    warnings.extend(leakage_warnings(&leakage));

    let mut csv_files = Vec::new();
    if let Some(dir) = out {
        let path = dir.join(format!("{}_compare.csv", scenario.name));
        let rows = ens.times.iter().zip(&distances).map(|(t, d)| vec![*t, *d]);
        write_csv(&path, &["t", "trace_distance"], rows)?;
        csv_files.push(path.display().to_string());
    }

    let mut traj = summary(scenario, &ens);
    traj.max_distance = Some(max_distance);
    traj.final_distance = Some(final_distance);
    traj.tolerance = Some(tol);
    Ok(RunReport {
        scenario: scenario.name.clone(),
        command: "compare".into(),
        seed: Some(scenario.plan.seed),
        classification: classify_generator(&g, DEFAULT_TOL)?,
        trajectory: Some(traj),
        stationary,
        leakage,
        warnings,
        csv_files,
        passed,
    })
}

pub fn cmd_noise_reduce(path: &Path, tol: f64) -> Result<NoiseReduceReport> {
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(&fs::read_to_string(path)?)?;
    let a = matrix_from_rows(&rows)?;
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    let r = minimal_reduction(&a, tol)?;
    let roundtrip_error = r.roundtrip_error(&a);
    let bound = tol * a.norm().max(1.0);
    Ok(NoiseReduceReport {
        gammas: r.gammas.clone(),
        unitary: matrix_to_rows(&r.unitary),
        chosen_b: matrix_to_rows(&r.chosen_b),
        active_noises: r.active_noises(),
        roundtrip_error,
        tolerance: bound,
        passed: roundtrip_error <= bound,
    })
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Qubits: `t,x1,x2,x3,mean_norm_sq`; otherwise `t,p0,…,p{d−1},mean_norm_sq`
/// with a trailing `leakage` column for oscillators.
pub fn write_ensemble_csv(path: &Path, ens: &EnsembleResult, oscillator: bool) -> Result<()> {
    let d = ens.rho_series.first().map_or(0, DensityMatrix::dim);
    let mut header: Vec<String> = vec!["t".into()];
    if d == 2 && !oscillator {
        header.extend(["x1", "x2", "x3"].map(String::from));
    } else {
        header.extend((0..d).map(|k| format!("p{k}")));
    }
    header.push("mean_norm_sq".into());
    if oscillator {
        header.push("leakage".into());
    }
    let rows = ens.times.iter().zip(&ens.rho_series).zip(&ens.mean_norm_sq).map(|((t, rho), n)| {
        let mut row = vec![*t];
        match rho.bloch_vector().filter(|_| !oscillator) {
            Some(x) => row.extend(x),
            None => row.extend(rho.populations()),
        }
        row.push(*n);
        if oscillator {
            row.push(leakage(rho));
        }
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, rows)
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Inconsistent(_) => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

fn emit<T: Serialize>(report: &T, out: &Path, file: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(out.join(file), format!("{text}\n"))?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let mut overrides = Overrides { tol: None, dt: cli.dt, ntraj: cli.ntraj, seed: None };
    fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Classify { scenario } => {
            let s = overrides.apply(&resolve_scenario(scenario)?)?;
            let report = cmd_classify(&s, cli.tol.unwrap_or(DEFAULT_TOL))?;
            emit(&report, &cli.out, &format!("{}_classify.json", s.name))?;
            Ok(report.passed)
        }
        Command::Simulate { scenario, seed, traj_dump } => {
            overrides.seed = *seed;
            let s = overrides.apply(&resolve_scenario(scenario)?)?;
            let sim = cmd_simulate(&s, *traj_dump, Some(&cli.out))?;
            for w in &sim.report.warnings {
                eprintln!("warning: {w}");
            }
            emit(&sim.report, &cli.out, &format!("{}_simulate.json", s.name))?;
            Ok(sim.report.passed)
        }
        Command::Compare { scenario, seed } => {
            overrides.seed = *seed;
            overrides.tol = cli.tol;
            let s = overrides.apply(&resolve_scenario(scenario)?)?;
            let report = cmd_compare(&s, Some(&cli.out))?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(&report, &cli.out, &format!("{}_compare.json", s.name))?;
            Ok(report.passed)
        }
        Command::NoiseReduce { matrix_file } => {
            let report = cmd_noise_reduce(matrix_file, cli.tol.unwrap_or(DEFAULT_TOL))?;
            let stem = matrix_file.file_stem().map_or("matrix".into(), |s| s.to_string_lossy().into_owned());
            emit(&report, &cli.out, &format!("{stem}_noise_reduce.json"))?;
            Ok(report.passed)
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
