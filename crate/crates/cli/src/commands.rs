//! Subcommand implementations. Each writes its files into an output
//! directory and returns a short human-readable summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use kappa_nbody::continuation::{
    potential_convergence, trajectory_convergence, vf_convergence, ComparisonMode, ConvergenceReport, SweepSpec,
};
use kappa_nbody::dynamics::{CurvedSystem, SystemState};
use kappa_nbody::geometry::{christoffel_closed, metric, ChartPoint, ChordalPoint, ManifoldSpec};
use kappa_nbody::integrate::{integrate, IntegratorConfig, Termination};
use kappa_nbody::oracle::{christoffel_numeric, ChartMetric, DEFAULT_STEP};
use kappa_nbody::verify::{run_suite, VerifyConfig, VerifyReport};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::scenario::{ExperimentKind, Scenario, Thresholds};

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct BodySnapshot {
    pub chart: ChartPoint,
    pub chordal: ChordalPoint,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Drift {
    pub initial: f64,
    #[serde(rename = "final")]
    pub last: f64,
    /// Max over samples of `|X(t) - X₀| / |X₀|`, or of `|X(t) - X₀|` when `X₀ = 0`.
    pub max_drift: f64,
    pub relative: bool,
}

impl Drift {
    fn from_series(xs: &[f64]) -> Drift {
        let x0 = xs[0];
        let relative = x0 != 0.0;
        let max_drift = xs
            .iter()
            .map(|x| if relative { ((x - x0) / x0).abs() } else { (x - x0).abs() })
            .fold(0.0, f64::max);
        Drift { initial: x0, last: *xs.last().unwrap(), max_drift, relative }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub termination: Termination,
    pub samples: usize,
    pub t_final: f64,
    pub energy: Drift,
    pub angular_momentum: Drift,
    pub initial: Vec<BodySnapshot>,
    #[serde(rename = "final")]
    pub last: Vec<BodySnapshot>,
}

fn snapshots(m: &ManifoldSpec, y: &[f64]) -> Vec<BodySnapshot> {
    let d = m.dim();
    let half = y.len() / 2;
    (0..half / d)
        .map(|r| {
            let chart = ChartPoint::from_slice(&y[r * d..(r + 1) * d]).expect("dim 2 or 3");
            BodySnapshot {
                chordal: ChordalPoint::from_chart(m.kappa(), &chart),
                chart,
                velocity: y[half + r * d..half + (r + 1) * d].to_vec(),
            }
        })
        .collect()
}

fn trajectory_header(dim: usize, n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for r in 1..=n {
        let names: &[&str] = if dim == 2 {
            &["s", "phi", "sdot", "phidot"]
        } else {
            &["s", "phi", "theta", "sdot", "phidot", "thetadot"]
        };
        cols.extend(names.iter().map(|c| format!("{c}_{r}")));
    }
    cols.push("E".into());
    cols.push("Lz".into());
    cols.join(",")
}

/// Integrates a scenario and writes `trajectory.csv`, `summary.json` and
/// `timing.json` into `out`.
///
/// A run stopped by a singularity still writes its files, then reports the
/// event as an error.
pub fn simulate(scenario_path: &Path, out: &Path) -> CliResult<SimulationSummary> {
    let scenario = Scenario::load(scenario_path)?;
    let r = scenario.resolve()?;
    let cfg = scenario
        .integrator
        .as_ref()
        .ok_or_else(|| CliError::Validation("integrator block is required for simulate".into()))?
        .to_config()?;
    let dim = r.manifold.dim();
    let sys = CurvedSystem::new(r.manifold, r.masses.clone(), scenario.potential)?;
    let state = SystemState::new(0.0, dim, r.positions(), r.velocities.clone())?;

    let started = Instant::now();
    let tr = integrate(&sys, 0.0, &state.to_vector(), &cfg)?;
    let wall = started.elapsed().as_secs_f64();

    let mut csv = trajectory_header(dim, r.masses.len());
    csv.push('\n');
    let mut energies = Vec::with_capacity(tr.times.len());
    let mut momenta = Vec::with_capacity(tr.times.len());
    for (t, y) in tr.times.iter().zip(&tr.states) {
        let st = SystemState::from_vector(*t, dim, y);
        let e = sys.energy(&st)?;
        let l = sys.angular_momentum(&st);
        energies.push(e);
        momenta.push(l);
        // positions then velocities per body
        let half = y.len() / 2;
        let mut row = vec![fmt_f64(*t)];
        for b in 0..r.masses.len() {
            row.extend(y[b * dim..(b + 1) * dim].iter().map(|x| fmt_f64(*x)));
            row.extend(y[half + b * dim..half + (b + 1) * dim].iter().map(|x| fmt_f64(*x)));
        }
        row.push(fmt_f64(e));
        row.push(fmt_f64(l));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }

    let (t_final, y_final) = tr.last();
    let summary = SimulationSummary {
        termination: tr.termination.clone(),
        samples: tr.times.len(),
        t_final: *t_final,
        energy: Drift::from_series(&energies),
        angular_momentum: Drift::from_series(&momenta),
        initial: snapshots(&r.manifold, &tr.states[0]),
        last: snapshots(&r.manifold, y_final),
    };
    ensure_dir(out)?;
    write_file(out, "trajectory.csv", &csv)?;
    write_file(out, "summary.json", &to_json(&summary))?;
    write_file(out, "timing.json", &to_json(&serde_json::json!({ "wall_seconds": wall })))?;

    match &summary.termination {
        Termination::SingularityEvent { t, message } => {
            Err(CliError::Singularity(format!("run stopped at t = {t}: {message}")))
        }
        _ => Ok(summary),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub reports: Vec<ConvergenceReport>,
    pub violations: Vec<String>,
}

fn report_tag(r: &ConvergenceReport) -> String {
    match (r.experiment.as_str(), r.mode) {
        ("vector-field", Some(ComparisonMode::SameChartTuple)) => "vector-field-same-chart-tuple".into(),
        ("vector-field", Some(ComparisonMode::ChordFixed)) => "vector-field-chord-fixed".into(),
        (e, _) => e.into(),
    }
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// `sign,kappa,error,failure` rows, positive curvatures first, each by
/// decreasing `|κ|`.
pub fn report_table(r: &ConvergenceReport) -> String {
    let mut out = String::from("sign,kappa,error,failure\n");
    for side in r.sides() {
        for e in &side.entries {
            let err = e.error.map(fmt_f64).unwrap_or_default();
            let fail = e.failure.as_deref().map(csv_quote).unwrap_or_default();
            let _ = writeln!(out, "{},{},{err},{fail}", side.sign, fmt_f64(e.kappa));
        }
    }
    out
}

fn violations(r: &ConvergenceReport, th: &Thresholds) -> Vec<String> {
    let tag = report_tag(r);
    let mut v = Vec::new();
    if !th.allow_failures {
        for e in r.failures() {
            v.push(format!("{tag}: kappa {} failed: {}", e.kappa, e.failure.as_deref().unwrap_or("")));
        }
    }
    for side in r.sides() {
        let label = if side.sign > 0 { "kappa > 0" } else { "kappa < 0" };
        let slope = side.fit.map(|f| f.slope);
        if th.min_slope.is_some() || th.max_slope.is_some() {
            match slope {
                None => v.push(format!("{tag} ({label}): no slope could be fitted")),
                Some(s) => {
                    if th.min_slope.is_some_and(|lo| s < lo) {
                        v.push(format!("{tag} ({label}): slope {s:.4} below {}", th.min_slope.unwrap()));
                    }
                    if th.max_slope.is_some_and(|hi| s > hi) {
                        v.push(format!("{tag} ({label}): slope {s:.4} above {}", th.max_slope.unwrap()));
                    }
                }
            }
        }
        if th.monotone && !side.monotone {
            v.push(format!("{tag} ({label}): E(kappa) is not monotone"));
        }
    }
    v
}

/// Runs the experiments of the scenario's `experiment` block and writes
/// `sweep.json` plus one CSV table per experiment and comparison mode.
///
/// Threshold violations are written to the report and then returned as an error.
pub fn sweep(scenario_path: &Path, out: &Path) -> CliResult<SweepOutput> {
    let scenario = Scenario::load(scenario_path)?;
    let r = scenario.resolve()?;
    let ex = scenario
        .experiment
        .as_ref()
        .ok_or_else(|| CliError::Validation("experiment block is required for sweep".into()))?;
    let base = scenario.base(&r);
    let spec = |mode| SweepSpec { kappas: ex.kappas.clone(), base: base.clone(), mode, velocity: ex.velocity };
    let modes = match ex.mode {
        Some(m) => vec![m],
        None => vec![ComparisonMode::SameChartTuple, ComparisonMode::ChordFixed],
    };

    let mut reports = Vec::new();
    for kind in &ex.experiments {
        match kind {
            ExperimentKind::VectorField => {
                for &m in &modes {
                    reports.push(vf_convergence(&spec(m))?);
                }
            }
            ExperimentKind::Potential => reports.push(potential_convergence(&spec(ComparisonMode::ChordFixed))?),
            ExperimentKind::Trajectory => reports.push(trajectory_convergence(
                &spec(ComparisonMode::ChordFixed),
                &IntegratorConfig::rk4(ex.dt, ex.t_end),
            )?),
        }
    }
    let violations: Vec<String> = reports.iter().flat_map(|rep| violations(rep, &ex.thresholds)).collect();

    ensure_dir(out)?;
    for rep in &reports {
        write_file(out, &format!("{}.csv", report_tag(rep)), &report_table(rep))?;
    }
    let output = SweepOutput { reports, violations };
    write_file(out, "sweep.json", &to_json(&output))?;
    if output.violations.is_empty() {
        Ok(output)
    } else {
        Err(CliError::Threshold(output.violations.join("; ")))
    }
}

/// Runs the invariant suite; `out`, when given, receives `verify.json`.
pub fn verify(seed: u64, checked: bool, out: Option<&Path>) -> CliResult<VerifyReport> {
    let report = run_suite(&VerifyConfig { seed, checked, ..VerifyConfig::default() });
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(dir, "verify.json", &to_json(&report))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeriveOutput {
    pub dim: usize,
    pub kappa: f64,
    pub point: ChartPoint,
    pub metric: Vec<Vec<f64>>,
    pub inverse_metric: Vec<Vec<f64>>,
    /// Nonzero closed-form symbols, keyed `Gamma^s_lj` with one-based indices.
    pub christoffel: BTreeMap<String, f64>,
    /// The same symbols from finite differences of the metric.
    pub christoffel_numeric: BTreeMap<String, f64>,
}

/// Metric and Christoffel tables at one chart point.
pub fn derive(dim: usize, kappa: f64, point: ChartPoint) -> CliResult<DeriveOutput> {
    let m = ManifoldSpec::new(dim, kappa)?;
    if point.dim() != dim {
        return Err(CliError::Validation(format!("point is {}-dimensional, manifold is {dim}", point.dim())));
    }
    m.validate_point(&point)?;
    let (g, ginv) = metric(&m, &point)?;
    let rows = |a: &kappa_nbody::DMatrix<f64>| (0..dim).map(|i| (0..dim).map(|j| a[(i, j)]).collect()).collect();
    let closed = christoffel_closed(&m, &point)?;
    let numeric = christoffel_numeric(&ChartMetric::new(m), &point.to_vec(), DEFAULT_STEP)?;
    let mut table = BTreeMap::new();
    let mut table_num = BTreeMap::new();
    for ((s, l, j), v) in closed.entries() {
        if l <= j && (v != 0.0 || numeric.get(s, l, j).abs() > 1e-9) {
            let name = kappa_nbody::geometry::Christoffel::symbol_name(s, l, j);
            table.insert(name.clone(), v);
            table_num.insert(name, numeric.get(s, l, j));
        }
    }
    Ok(DeriveOutput {
        dim,
        kappa,
        point,
        metric: rows(&g),
        inverse_metric: rows(&ginv),
        christoffel: table,
        christoffel_numeric: table_num,
    })
}

pub fn derive_json(d: &DeriveOutput) -> String {
    to_json(d)
}

pub fn verify_json(r: &VerifyReport) -> String {
    to_json(r)
}
