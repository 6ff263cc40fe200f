//! Curvature-continuation experiments: how fast the curved potential, vector
//! field and flow approach their Newtonian counterparts as `κ → 0`.
//!
//! Each experiment produces an error `E(κ)` per curvature and a least-squares
//! fit of `log E` against `log |κ|`, separately for each sign of `κ`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{rhs_curved, CurvedSystem, SystemState};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_to_chord, ChartPoint, ChordalPoint, ManifoldSpec};
use crate::integrate::{integrate, IntegratorConfig, Method};
use crate::ktrig::Curvature;
use crate::potentials::{potential_continuity, validate_masses, Potential};

/// Errors below this are dominated by rounding and are left out of slope fits.
pub const FIT_FLOOR: f64 = 100.0 * f64::EPSILON;

/// Per-step growth tolerated by the monotonicity check.
pub const MONOTONE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of `log y = slope · log x + intercept`, skipping points
/// with `y` at or below [`FIT_FLOOR`].
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && **x > 0.0 && y.is_finite() && **y > FIT_FLOOR)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual =
        (pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Some(SlopeFit { slope, intercept, residual, points: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonMode {
    /// Same numeric chart tuple `(s, φ[, θ], velocities)` for every κ.
    SameChartTuple,
    /// Chords from the pole held fixed; `s = 2 sn_κ⁻¹(τ/2)` per κ.
    ChordFixed,
}

/// How velocities are carried across curvatures in chord-fixed mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityConvention {
    /// Chart velocities are held numerically fixed.
    #[default]
    ChartFixed,
    /// The radial velocity is rescaled so that `dτ/dt` is held fixed.
    ChordalFixed,
}

/// One configuration: chordal positions and chart velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordalState {
    pub positions: Vec<ChordalPoint>,
    /// Chart velocities, `dim` per body. In chord-fixed mode with
    /// [`VelocityConvention::ChordalFixed`] the radial entries are `dτ/dt`.
    pub velocities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseScenario {
    pub dim: usize,
    pub masses: Vec<f64>,
    pub potential: Potential,
    /// Sampled configurations; errors are the supremum over all of them.
    pub states: Vec<ChordalState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kappas: Vec<f64>,
    pub base: BaseScenario,
    pub mode: ComparisonMode,
    #[serde(default)]
    pub velocity: VelocityConvention,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kappas.is_empty() {
            return Err(Error::invalid("kappa list is empty"));
        }
        for (i, k) in self.kappas.iter().enumerate() {
            if !k.is_finite() || *k == 0.0 {
                return Err(Error::invalid(format!("kappa values must be finite and nonzero, got {k}")));
            }
            if self.kappas[..i].contains(k) {
                return Err(Error::invalid(format!("duplicate kappa {k}")));
            }
        }
        let b = &self.base;
        ManifoldSpec::new(b.dim, 0.0)?;
        validate_masses(&b.masses)?;
        if b.states.is_empty() {
            return Err(Error::invalid("base scenario has no states"));
        }
        for st in &b.states {
            if st.positions.len() != b.masses.len() || st.velocities.len() != b.masses.len() * b.dim {
                return Err(Error::invalid("state does not match the number of bodies"));
            }
            for p in &st.positions {
                if (p.theta.is_some()) != (b.dim == 3) {
                    return Err(Error::invalid("position dimension does not match the scenario"));
                }
            }
        }
        Ok(())
    }
}

impl ChordalState {
    /// Chart state on `M_κ` under the given comparison mode.
    pub fn to_system_state(
        &self,
        kappa: Curvature,
        dim: usize,
        mode: ComparisonMode,
        velocity: VelocityConvention,
    ) -> Result<SystemState> {
        let manifold = ManifoldSpec::new(dim, kappa.value())?;
        let mut positions = Vec::with_capacity(self.positions.len() * dim);
        let mut velocities = self.velocities.clone();
        for (r, c) in self.positions.iter().enumerate() {
            let p = match mode {
                ComparisonMode::SameChartTuple => ChartPoint { s: c.tau, phi: c.phi, theta: c.theta },
                ComparisonMode::ChordFixed => c.to_chart(kappa)?,
            };
            manifold.validate_point(&p)?;
            if mode == ComparisonMode::ChordFixed && velocity == VelocityConvention::ChordalFixed {
                // dτ/ds = csn_κ(s/2)
                velocities[r * dim] /= kappa.csn(0.5 * p.s);
            }
            positions.extend(p.to_vec());
        }
        SystemState::new(0.0, dim, positions, velocities)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    /// `+1` or `-1`.
    pub sign: i8,
    /// Ordered by decreasing `|κ|`.
    pub entries: Vec<ConvergenceEntry>,
    pub fit: Option<SlopeFit>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ComparisonMode>,
    pub entries: Vec<ConvergenceEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive: Option<SignReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative: Option<SignReport>,
}

impl ConvergenceReport {
    fn assemble(experiment: &str, mode: Option<ComparisonMode>, results: Vec<(f64, Result<f64>)>) -> Self {
        let entries: Vec<ConvergenceEntry> = results
            .into_iter()
            .map(|(kappa, r)| match r {
                Ok(e) => ConvergenceEntry { kappa, error: Some(e), failure: None },
                Err(err) => ConvergenceEntry { kappa, error: None, failure: Some(err.to_string()) },
            })
            .collect();
        let side = |sign: i8| -> Option<SignReport> {
            let mut es: Vec<ConvergenceEntry> = entries
                .iter()
                .filter(|e| (e.kappa > 0.0) == (sign > 0))
                .cloned()
                .collect();
            if es.is_empty() {
                return None;
            }
            es.sort_by(|a, b| b.kappa.abs().total_cmp(&a.kappa.abs()));
            let ok: Vec<(f64, f64)> =
                es.iter().filter_map(|e| e.error.map(|v| (e.kappa.abs(), v))).collect();
            let fit = fit_loglog_slope(
                &ok.iter().map(|p| p.0).collect::<Vec<_>>(),
                &ok.iter().map(|p| p.1).collect::<Vec<_>>(),
            );
            let monotone = ok.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + MONOTONE_SLACK));
            Some(SignReport { sign, entries: es, fit, monotone })
        };
        ConvergenceReport {
            experiment: experiment.to_string(),
            mode,
            positive: side(1),
            negative: side(-1),
            entries,
        }
    }

    /// Entries whose evaluation failed.
    pub fn failures(&self) -> impl Iterator<Item = &ConvergenceEntry> {
        self.entries.iter().filter(|e| e.failure.is_some())
    }

    pub fn sides(&self) -> impl Iterator<Item = &SignReport> {
        self.positive.iter().chain(self.negative.iter())
    }
}

/// Component-wise max deviation, relative where the reference exceeds 1.
fn field_error(curved: &[f64], flat: &[f64]) -> f64 {
    curved
        .iter()
        .zip(flat)
        .map(|(a, b)| {
            let d = (a - b).abs();
            if b.abs() > 1.0 {
                d / b.abs()
            } else {
                d
            }
        })
        .fold(0.0, f64::max)
}

fn curvature(k: f64) -> Result<Curvature> {
    Curvature::new(k)
}

/// Vector-field convergence `max |F_κ - F_0|` over the sampled states.
pub fn vf_convergence(spec: &SweepSpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let b = &spec.base;
    let flat = Curvature::FLAT;
    let references = b
        .states
        .iter()
        .map(|st| {
            let s0 = st.to_system_state(flat, b.dim, spec.mode, spec.velocity)?;
            Ok((rhs_curved(&s0, &b.masses, flat, &b.potential)?.accelerations, s0))
        })
        .collect::<Result<Vec<_>>>()?;
    let results = spec
        .kappas
        .iter()
        .map(|&k| {
            let eval = || -> Result<f64> {
                let kappa = curvature(k)?;
                let mut worst: f64 = 0.0;
                for (st, (f0, _)) in b.states.iter().zip(&references) {
                    let sk = st.to_system_state(kappa, b.dim, spec.mode, spec.velocity)?;
                    let fk = rhs_curved(&sk, &b.masses, kappa, &b.potential)?;
                    worst = worst.max(field_error(&fk.accelerations, f0));
                }
                Ok(worst)
            };
            (k, eval())
        })
        .collect();
    Ok(ConvergenceReport::assemble("vector-field", Some(spec.mode), results))
}

/// Potential convergence `max |U_κ - U_0|` over the sampled states, with
/// chords from the pole held fixed.
pub fn potential_convergence(spec: &SweepSpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let b = &spec.base;
    let results = spec
        .kappas
        .iter()
        .map(|&k| {
            let eval = || -> Result<f64> {
                let mut worst: f64 = 0.0;
                for st in &b.states {
                    let table = potential_continuity(&st.positions, &b.masses, &[k])?;
                    worst = worst.max(table.rows[0].error);
                }
                Ok(worst)
            };
            (k, eval())
        })
        .collect();
    Ok(ConvergenceReport::assemble("potential", Some(ComparisonMode::ChordFixed), results))
}

/// Trajectory convergence: max deviation over the samples between the flow on
/// `M_κ` and the Newtonian flow, both started from the same chordal data.
///
/// Radial positions are compared as chords and radial velocities as `dτ/dt`.
/// Requires a fixed-step integrator so that samples align.
pub fn trajectory_convergence(spec: &SweepSpec, cfg: &IntegratorConfig) -> Result<ConvergenceReport> {
    spec.validate()?;
    cfg.validate()?;
    if !matches!(cfg.method, Method::Rk4 { .. }) {
        return Err(Error::invalid("trajectory comparison needs a fixed-step integrator"));
    }
    let b = &spec.base;
    let d = b.dim;
    let flat = Curvature::FLAT;

    let run = |kappa: Curvature, st: &ChordalState| -> Result<crate::integrate::Trajectory> {
        let s0 = st.to_system_state(kappa, d, ComparisonMode::ChordFixed, spec.velocity)?;
        let sys = CurvedSystem::new(ManifoldSpec::new(d, kappa.value())?, b.masses.clone(), b.potential)?;
        let tr = integrate(&sys, 0.0, &s0.to_vector(), cfg)?;
        match &tr.termination {
            crate::integrate::Termination::Completed => Ok(tr),
            other => Err(Error::invalid(format!("integration ended early at kappa = {}: {other:?}", kappa))),
        }
    };
    let references = b.states.iter().map(|st| run(flat, st)).collect::<Result<Vec<_>>>()?;

    let results = spec
        .kappas
        .iter()
        .map(|&k| {
            let eval = || -> Result<f64> {
                let kappa = curvature(k)?;
                let mut worst: f64 = 0.0;
                for (st, reference) in b.states.iter().zip(&references) {
                    let tr = run(kappa, st)?;
                    let half = tr.states[0].len() / 2;
                    for (yk, y0) in tr.states.iter().zip(&reference.states) {
                        for i in 0..half {
                            let (a, b0) = if i % d == 0 {
                                (geodesic_to_chord(kappa, yk[i]), y0[i])
                            } else {
                                (yk[i], y0[i])
                            };
                            worst = worst.max((a - b0).abs());
                            let (va, vb) = if i % d == 0 {
                                (yk[half + i] * kappa.csn(0.5 * yk[i]), y0[half + i])
                            } else {
                                (yk[half + i], y0[half + i])
                            };
                            worst = worst.max((va - vb).abs());
                        }
                    }
                }
                Ok(worst)
            };
            (k, eval())
        })
        .collect();
    Ok(ConvergenceReport::assemble("trajectory", Some(ComparisonMode::ChordFixed), results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fit_recovers_power_law() {
        let xs = [1e-1, 1e-2, 1e-3, 1e-4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        let f = fit_loglog_slope(&xs, &ys).unwrap();
        assert_relative_eq!(f.slope, 1.5, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 3f64.ln(), epsilon = 1e-10);
        assert!(f.residual < 1e-12);
        assert_eq!(f.points, 4);
    }

    #[test]
    fn fit_skips_floor_values() {
        let xs = [1e-1, 1e-2, 1e-3];
        let ys = [1e-1, 1e-2, 1e-20];
        let f = fit_loglog_slope(&xs, &ys).unwrap();
        assert_eq!(f.points, 2);
        assert!(fit_loglog_slope(&[1.0], &[1.0]).is_none());
    }

    fn single_body_spec(kappas: Vec<f64>, mode: ComparisonMode) -> SweepSpec {
        SweepSpec {
            kappas,
            base: BaseScenario {
                dim: 2,
                masses: vec![1.0],
                potential: Potential::None,
                states: vec![ChordalState {
                    positions: vec![ChordalPoint::planar(0.8, 0.4)],
                    velocities: vec![0.3, 1.1],
                }],
            },
            mode,
            velocity: VelocityConvention::ChartFixed,
        }
    }

    #[test]
    fn geometric_terms_converge() {
        for mode in [ComparisonMode::SameChartTuple, ComparisonMode::ChordFixed] {
            let r = vf_convergence(&single_body_spec(vec![1e-6, -1e-6], mode)).unwrap();
            for e in &r.entries {
                assert!(e.error.unwrap() <= 1e-5, "{e:?}");
            }
        }
    }

    #[test]
    fn oversized_kappa_fails_per_entry() {
        // κ τ²/4 > 1: the chord no longer fits on the sphere
        let r = vf_convergence(&single_body_spec(vec![10.0, 1e-3], ComparisonMode::ChordFixed)).unwrap();
        assert_eq!(r.failures().count(), 1);
        assert!(r.entries[0].failure.as_ref().unwrap().contains("chord_to_geodesic"));
        // π²/4 ≤ κ s² on the same chart tuple: s beyond the antipode
        let r = vf_convergence(&single_body_spec(vec![20.0], ComparisonMode::SameChartTuple)).unwrap();
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn spec_validation() {
        let mut s = single_body_spec(vec![0.0], ComparisonMode::ChordFixed);
        assert!(s.validate().is_err());
        s.kappas = vec![0.1, 0.1];
        assert!(s.validate().is_err());
        s.kappas = vec![0.1];
        s.base.states[0].velocities.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn chordal_velocity_convention_rescales_radial_speed() {
        let st = ChordalState { positions: vec![ChordalPoint::planar(1.0, 0.0)], velocities: vec![1.0, 0.0] };
        let k = Curvature::new(1.0).unwrap();
        let a = st
            .to_system_state(k, 2, ComparisonMode::ChordFixed, VelocityConvention::ChordalFixed)
            .unwrap();
        let s = a.positions[0];
        assert_relative_eq!(a.velocities[0] * k.csn(0.5 * s), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn trajectory_comparison_requires_fixed_step() {
        let spec = single_body_spec(vec![1e-2], ComparisonMode::ChordFixed);
        let cfg = IntegratorConfig {
            method: Method::Rk45Adaptive { tol_abs: 1e-9, tol_rel: 1e-9, dt_min: 1e-9, dt_max: 0.1 },
            t_end: 1.0,
            sample_stride: 1,
        };
        assert!(trajectory_convergence(&spec, &cfg).is_err());
    }
}
