//! Scenario files: parsing with field-level diagnostics, validation and a
//! canonical writer.

use std::path::Path;

use kappa_nbody::continuation::{BaseScenario, ChordalState, ComparisonMode, VelocityConvention};
use kappa_nbody::integrate::{IntegratorConfig, Method};
use kappa_nbody::potentials::Potential;
use kappa_nbody::{ChartPoint, ChordalPoint, ManifoldSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub manifold: ManifoldBlock,
    pub bodies: Vec<Body>,
    #[serde(default = "default_potential")]
    pub potential: Potential,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
}

fn default_potential() -> Potential {
    Potential::Cotangent
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldBlock {
    pub dim: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Body {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mass: f64,
    pub position: Position,
    /// Chart velocities `(ṡ, φ̇[, θ̇])`.
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Position {
    Chart {
        s: f64,
        phi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    Chordal {
        tau: f64,
        phi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
}

impl Position {
    fn convention(&self) -> &'static str {
        match self {
            Position::Chart { .. } => "chart",
            Position::Chordal { .. } => "chordal",
        }
    }

    fn dim(&self) -> usize {
        let theta = match self {
            Position::Chart { theta, .. } | Position::Chordal { theta, .. } => theta,
        };
        if theta.is_some() {
            3
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorBlock {
    pub method: MethodName,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_abs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub sample_stride: usize,
}

fn one() -> usize {
    1
}

fn is_one(n: &usize) -> bool {
    *n == 1
}

impl IntegratorBlock {
    pub fn to_config(&self) -> CliResult<IntegratorConfig> {
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| CliError::Validation(format!("integrator.{field} is required for this method")))
        };
        let method = match self.method {
            MethodName::Rk4 => Method::Rk4 { dt: need(self.dt, "dt")? },
            MethodName::Rk45 => Method::Rk45Adaptive {
                tol_abs: need(self.tol_abs, "tol_abs")?,
                tol_rel: need(self.tol_rel, "tol_rel")?,
                dt_min: need(self.dt_min, "dt_min")?,
                dt_max: need(self.dt_max, "dt_max")?,
            },
        };
        let cfg = IntegratorConfig { method, t_end: self.t_end, sample_stride: self.sample_stride };
        cfg.validate().map_err(|e| CliError::Validation(format!("integrator: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VectorField,
    Potential,
    Trajectory,
}

fn all_experiments() -> Vec<ExperimentKind> {
    vec![ExperimentKind::VectorField, ExperimentKind::Potential, ExperimentKind::Trajectory]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub kappas: Vec<f64>,
    /// Comparison mode for the vector-field sweep; both when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ComparisonMode>,
    #[serde(default)]
    pub velocity: VelocityConvention,
    #[serde(default = "all_experiments")]
    pub experiments: Vec<ExperimentKind>,
    /// Trajectory sweep horizon.
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Trajectory sweep RK4 step.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_t_end() -> f64 {
    5.0
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
    /// Require `E(κ)` to decrease along each sign.
    #[serde(default)]
    pub monotone: bool,
    /// Tolerate per-κ evaluation failures.
    #[serde(default)]
    pub allow_failures: bool,
}

/// A validated scenario with positions in both conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub manifold: ManifoldSpec,
    pub masses: Vec<f64>,
    pub chart: Vec<ChartPoint>,
    pub chordal: Vec<ChordalPoint>,
    pub velocities: Vec<f64>,
}

impl Resolved {
    pub fn positions(&self) -> Vec<f64> {
        self.chart.iter().flat_map(|p| p.to_vec()).collect()
    }
}

fn body_label(i: usize, b: &Body) -> String {
    match &b.name {
        Some(n) => format!("body {i} ({n})"),
        None => format!("body {i}"),
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> CliResult<Scenario> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Validation(format!("field `{path}`: {inner}"))
        })?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> CliResult<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Scenario::from_json(&text)
    }

    /// Canonical pretty-printed form; parses back to an identical scenario.
    pub fn canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Checks every invariant and converts positions to both conventions.
    pub fn resolve(&self) -> CliResult<Resolved> {
        let invalid = |msg: String| CliError::Validation(msg);
        let ManifoldBlock { dim, kappa } = self.manifold;
        let manifold = ManifoldSpec::new(dim, kappa).map_err(|e| invalid(format!("manifold: {e}")))?;
        let k = manifold.kappa();
        if self.bodies.is_empty() {
            return Err(invalid("bodies: at least one body is required".into()));
        }
        let convention = self.bodies[0].position.convention();
        let mut resolved = Resolved {
            manifold,
            masses: Vec::new(),
            chart: Vec::new(),
            chordal: Vec::new(),
            velocities: Vec::new(),
        };
        for (i, b) in self.bodies.iter().enumerate() {
            let label = body_label(i, b);
            if !(b.mass.is_finite() && b.mass > 0.0) {
                return Err(invalid(format!("{label}: mass must be positive and finite, got {}", b.mass)));
            }
            if b.position.convention() != convention {
                return Err(invalid(format!(
                    "{label}: position uses {} coordinates but earlier bodies use {convention}; one convention per file",
                    b.position.convention()
                )));
            }
            if b.position.dim() != dim {
                return Err(invalid(format!("{label}: position is {}-dimensional, manifold is {dim}", b.position.dim())));
            }
            if b.velocity.len() != dim || b.velocity.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{label}: velocity needs {dim} finite components")));
            }
            let (chart, chordal) = match b.position {
                Position::Chart { s, phi, theta } => {
                    let p = ChartPoint { s, phi, theta };
                    manifold.validate_point(&p).map_err(|e| invalid(format!("{label}: {e}")))?;
                    (p, ChordalPoint::from_chart(k, &p))
                }
                Position::Chordal { tau, phi, theta } => {
                    let c = ChordalPoint { tau, phi, theta };
                    if !(tau.is_finite() && tau >= 0.0) {
                        return Err(invalid(format!("{label}: tau must be finite and non-negative")));
                    }
                    let p = c.to_chart(k).map_err(|e| invalid(format!("{label}: {e}")))?;
                    manifold.validate_point(&p).map_err(|e| invalid(format!("{label}: {e}")))?;
                    (p, c)
                }
            };
            resolved.masses.push(b.mass);
            resolved.chart.push(chart);
            resolved.chordal.push(chordal);
            resolved.velocities.extend(&b.velocity);
        }
        if self.potential == Potential::Newton && !k.is_flat() {
            return Err(invalid("potential: newton requires kappa = 0".into()));
        }
        if let Some(ib) = &self.integrator {
            ib.to_config()?;
        }
        if let Some(ex) = &self.experiment {
            self.validate_experiment(ex)?;
        }
        Ok(resolved)
    }

    fn validate_experiment(&self, ex: &Experiment) -> CliResult<()> {
        let invalid = |msg: &str| Err(CliError::Validation(format!("experiment: {msg}")));
        if ex.kappas.is_empty() {
            return invalid("kappas is empty");
        }
        if ex.kappas.iter().any(|k| !k.is_finite() || *k == 0.0) {
            return invalid("kappas must be finite and nonzero");
        }
        if ex.experiments.is_empty() {
            return invalid("experiments is empty");
        }
        if !(ex.t_end > 0.0 && ex.dt > 0.0 && ex.dt.is_finite() && ex.t_end.is_finite()) {
            return invalid("t_end and dt must be positive");
        }
        if self.potential == Potential::Newton {
            return invalid("sweeps compare the cotangent potential with its limit; use potential cotangent or none");
        }
        Ok(())
    }

    /// Chordal base configuration for κ-sweeps.
    pub fn base(&self, r: &Resolved) -> BaseScenario {
        BaseScenario {
            dim: r.manifold.dim(),
            masses: r.masses.clone(),
            potential: self.potential,
            states: vec![ChordalState { positions: r.chordal.clone(), velocities: r.velocities.clone() }],
        }
    }
}
