//! Equations of motion on `M_κ²` and `M_κ³` in intrinsic coordinates.
//!
//! Two dimensions, per body `r`:
//!
//! ```text
//! s̈ = -(1/m) ∂U/∂s + φ̇² sn csn
//! φ̈ = -(1/m) sn⁻² ∂U/∂φ - 2 ṡ φ̇ ctn
//! ```
//!
//! Three dimensions:
//!
//! ```text
//! s̈ = -(1/m) ∂U/∂s + (φ̇² + θ̇² sin²φ) sn csn
//! φ̈ = -(1/m) sn⁻² ∂U/∂φ + θ̇² sin φ cos φ - 2 ṡ φ̇ ctn
//! θ̈ = -(1/m) sn⁻² sin⁻²φ ∂U/∂θ - 2 ṡ θ̇ ctn - 2 φ̇ θ̇ cot φ
//! ```
//!
//! with all κ-trigonometric functions evaluated at `s`. At `κ = 0` these are
//! the polar/spherical forms of Newton's equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{direction, direction_partials, ChartPoint, ManifoldSpec, CHART_TOLERANCE};
use crate::integrate::OdeSystem;
use crate::ktrig::Curvature;
use crate::potentials::{validate_masses, ChartPotential, SingularityKind, SingularityReport, SINGULARITY_TOLERANCE};

/// Time, chart positions and chart velocities of all bodies, `dim` entries
/// per body in each vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub dim: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl SystemState {
    pub fn new(t: f64, dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if positions.len() != velocities.len() || !positions.len().is_multiple_of(dim) || positions.is_empty() {
            return Err(Error::invalid("positions and velocities must hold dim entries per body"));
        }
        Ok(SystemState { t, dim, positions, velocities })
    }

    pub fn from_bodies(t: f64, bodies: &[(ChartPoint, Vec<f64>)]) -> Result<Self> {
        let dim = bodies.first().map(|b| b.0.dim()).ok_or_else(|| Error::invalid("no bodies"))?;
        let mut positions = Vec::new();
        let mut velocities = Vec::new();
        for (p, v) in bodies {
            if p.dim() != dim || v.len() != dim {
                return Err(Error::invalid("mixed dimensions in body list"));
            }
            positions.extend(p.to_vec());
            velocities.extend(v);
        }
        SystemState::new(t, dim, positions, velocities)
    }

    pub fn n_bodies(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn position(&self, r: usize) -> ChartPoint {
        ChartPoint::from_slice(&self.positions[r * self.dim..(r + 1) * self.dim]).expect("dim 2 or 3")
    }

    pub fn velocity(&self, r: usize) -> &[f64] {
        &self.velocities[r * self.dim..(r + 1) * self.dim]
    }

    /// Packs into the first-order vector `[positions, velocities]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut y = self.positions.clone();
        y.extend_from_slice(&self.velocities);
        y
    }

    pub fn from_vector(t: f64, dim: usize, y: &[f64]) -> Self {
        let half = y.len() / 2;
        SystemState { t, dim, positions: y[..half].to_vec(), velocities: y[half..].to_vec() }
    }
}

/// Chart accelerations of all bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldEval {
    pub accelerations: Vec<f64>,
}

/// Per-body trigonometric data, with the chart-regularity check.
struct Frame {
    sn: f64,
    csn: f64,
    ctn: f64,
}

fn radial(kappa: Curvature, s: f64) -> Result<Frame> {
    let sn = kappa.sn(s);
    if sn.abs() < CHART_TOLERANCE {
        return Err(Error::ChartSingularity { what: "sn_kappa(s)", value: sn });
    }
    let csn = kappa.csn(s);
    Ok(Frame { sn, csn, ctn: csn / sn })
}

fn polar_sin_cos(phi: f64) -> Result<(f64, f64)> {
    let (sp, cp) = phi.sin_cos();
    if sp.abs() < CHART_TOLERANCE {
        return Err(Error::ChartSingularity { what: "sin(phi)", value: sp });
    }
    Ok((sp, cp))
}

fn check_inputs(state: &SystemState, masses: &[f64], dim: usize) -> Result<()> {
    if state.dim != dim {
        return Err(Error::invalid(format!("expected a {dim}-dimensional state, got {}", state.dim)));
    }
    if masses.len() != state.n_bodies() {
        return Err(Error::invalid("one mass per body required"));
    }
    validate_masses(masses)
}

fn potential_gradient(
    state: &SystemState,
    masses: &[f64],
    kappa: Curvature,
    potential: &dyn ChartPotential,
) -> Result<Vec<f64>> {
    let m = ManifoldSpec::new(state.dim, kappa.value())?;
    let mut grad = vec![0.0; state.positions.len()];
    potential.gradient(&m, masses, &state.positions, &mut grad)?;
    Ok(grad)
}

/// Vector field on `M_κ²`.
pub fn rhs_curved_2d(
    state: &SystemState,
    masses: &[f64],
    kappa: Curvature,
    potential: &dyn ChartPotential,
) -> Result<VectorFieldEval> {
    check_inputs(state, masses, 2)?;
    let grad = potential_gradient(state, masses, kappa, potential)?;
    let mut acc = vec![0.0; state.positions.len()];
    for (r, &m) in masses.iter().enumerate() {
        let i = 2 * r;
        let f = radial(kappa, state.positions[i])?;
        let (sd, pd) = (state.velocities[i], state.velocities[i + 1]);
        acc[i] = -grad[i] / m + pd * pd * f.sn * f.csn;
        acc[i + 1] = -grad[i + 1] / (m * f.sn * f.sn) - 2.0 * sd * pd * f.ctn;
    }
    Ok(VectorFieldEval { accelerations: acc })
}

/// Vector field on `M_κ³`.
pub fn rhs_curved_3d(
    state: &SystemState,
    masses: &[f64],
    kappa: Curvature,
    potential: &dyn ChartPotential,
) -> Result<VectorFieldEval> {
    check_inputs(state, masses, 3)?;
    let grad = potential_gradient(state, masses, kappa, potential)?;
    let mut acc = vec![0.0; state.positions.len()];
    for (r, &m) in masses.iter().enumerate() {
        let i = 3 * r;
        let f = radial(kappa, state.positions[i])?;
        let (sp, cp) = polar_sin_cos(state.positions[i + 1])?;
        let (sd, pd, td) = (state.velocities[i], state.velocities[i + 1], state.velocities[i + 2]);
        let sn2 = f.sn * f.sn;
        acc[i] = -grad[i] / m + (pd * pd + td * td * sp * sp) * f.sn * f.csn;
        acc[i + 1] = -grad[i + 1] / (m * sn2) + td * td * sp * cp - 2.0 * sd * pd * f.ctn;
        acc[i + 2] =
            -grad[i + 2] / (m * sn2 * sp * sp) - 2.0 * sd * td * f.ctn - 2.0 * pd * td * cp / sp;
    }
    Ok(VectorFieldEval { accelerations: acc })
}

/// Dispatches on the state dimension.
pub fn rhs_curved(
    state: &SystemState,
    masses: &[f64],
    kappa: Curvature,
    potential: &dyn ChartPotential,
) -> Result<VectorFieldEval> {
    match state.dim {
        2 => rhs_curved_2d(state, masses, kappa, potential),
        3 => rhs_curved_3d(state, masses, kappa, potential),
        d => Err(Error::invalid(format!("unsupported dimension {d}"))),
    }
}

/// Newton's equations in flat polar (2D) or spherical (3D) coordinates,
/// written with `s` in place of the κ-trigonometric functions.
pub fn rhs_flat_polar(
    state: &SystemState,
    masses: &[f64],
    potential: &dyn ChartPotential,
) -> Result<VectorFieldEval> {
    check_inputs(state, masses, state.dim)?;
    let grad = potential_gradient(state, masses, Curvature::FLAT, potential)?;
    let d = state.dim;
    let mut acc = vec![0.0; state.positions.len()];
    for (r, &m) in masses.iter().enumerate() {
        let i = d * r;
        let s = state.positions[i];
        if s.abs() < CHART_TOLERANCE {
            return Err(Error::ChartSingularity { what: "s", value: s });
        }
        let (sd, pd) = (state.velocities[i], state.velocities[i + 1]);
        if d == 2 {
            acc[i] = -grad[i] / m + s * pd * pd;
            acc[i + 1] = -grad[i + 1] / (m * s * s) - 2.0 / s * sd * pd;
        } else {
            let (sp, cp) = polar_sin_cos(state.positions[i + 1])?;
            let td = state.velocities[i + 2];
            acc[i] = -grad[i] / m + s * (pd * pd + td * td * sp * sp);
            acc[i + 1] = -grad[i + 1] / (m * s * s) + td * td * sp * cp - 2.0 / s * sd * pd;
            acc[i + 2] = -grad[i + 2] / (m * s * s * sp * sp) - 2.0 / s * sd * td - 2.0 * pd * td * cp / sp;
        }
    }
    Ok(VectorFieldEval { accelerations: acc })
}

/// Newtonian accelerations `ẍ_r = -(1/m_r) ∂U₀/∂x_r` in Cartesian coordinates.
pub fn rhs_newton_cartesian(x: &[f64], masses: &[f64], dim: usize) -> Result<Vec<f64>> {
    validate_masses(masses)?;
    if x.len() != masses.len() * dim {
        return Err(Error::invalid("one Cartesian point per mass required"));
    }
    let n = masses.len();
    let mut acc = vec![0.0; x.len()];
    let mut reports = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut diff = [0.0; 3];
            for c in 0..dim {
                diff[c] = x[j * dim + c] - x[i * dim + c];
            }
            let r2: f64 = diff.iter().map(|d| d * d).sum();
            let r = r2.sqrt();
            if r < SINGULARITY_TOLERANCE {
                reports.push(SingularityReport { i, j, kind: SingularityKind::Collision, value: r });
                continue;
            }
            let inv3 = 1.0 / (r2 * r);
            for c in 0..dim {
                acc[i * dim + c] += masses[j] * diff[c] * inv3;
                acc[j * dim + c] -= masses[i] * diff[c] * inv3;
            }
        }
    }
    if !reports.is_empty() {
        return Err(Error::Singular(reports));
    }
    Ok(acc)
}

/// Maps flat polar/spherical chart accelerations to Cartesian ones with the
/// analytic second derivative of `x = s u(angles)`.
pub fn polar_to_cartesian_acceleration(state: &SystemState, chart_acc: &[f64]) -> Vec<f64> {
    let d = state.dim;
    let mut out = Vec::with_capacity(state.positions.len());
    for r in 0..state.n_bodies() {
        let p = &state.positions[r * d..(r + 1) * d];
        let v = &state.velocities[r * d..(r + 1) * d];
        let a = &chart_acc[r * d..(r + 1) * d];
        let (s, sd, sdd) = (p[0], v[0], a[0]);
        let u = direction(&p[1..]);
        let du = direction_partials(&p[1..]);
        // second partials of the direction
        let (ddu, udot) = if d == 2 {
            let mut ddu = [[[0.0; 3]; 2]; 2];
            ddu[0][0] = [-u[0], -u[1], 0.0];
            let udot = [du[0][0] * v[1], du[0][1] * v[1], 0.0];
            (ddu, udot)
        } else {
            let (sp, cp) = p[1].sin_cos();
            let (st, ct) = p[2].sin_cos();
            let mut ddu = [[[0.0; 3]; 2]; 2];
            ddu[0][0] = [-sp * st, -sp * ct, -cp];
            ddu[0][1] = [cp * ct, -cp * st, 0.0];
            ddu[1][0] = ddu[0][1];
            ddu[1][1] = [-sp * st, -sp * ct, 0.0];
            let mut udot = [0.0; 3];
            for c in 0..3 {
                udot[c] = du[0][c] * v[1] + du[1][c] * v[2];
            }
            (ddu, udot)
        };
        let n_ang = d - 1;
        for c in 0..d {
            let mut uddot = 0.0;
            for i in 0..n_ang {
                uddot += du[i][c] * a[1 + i];
                for j in 0..n_ang {
                    uddot += ddu[i][j][c] * v[1 + i] * v[1 + j];
                }
            }
            out.push(sdd * u[c] + 2.0 * sd * udot[c] + s * uddot);
        }
    }
    out
}

/// Total energy `½ Σ m g(v, v) + U`.
pub fn energy(
    state: &SystemState,
    masses: &[f64],
    kappa: Curvature,
    potential: &dyn ChartPotential,
) -> Result<f64> {
    let m = ManifoldSpec::new(state.dim, kappa.value())?;
    let d = state.dim;
    let mut kinetic = 0.0;
    for (r, &mass) in masses.iter().enumerate() {
        let p = &state.positions[r * d..(r + 1) * d];
        let v = &state.velocities[r * d..(r + 1) * d];
        let sn2 = kappa.sn(p[0]).powi(2);
        let mut g_vv = v[0] * v[0] + sn2 * v[1] * v[1];
        if d == 3 {
            g_vv += sn2 * p[1].sin().powi(2) * v[2] * v[2];
        }
        kinetic += 0.5 * mass * g_vv;
    }
    Ok(kinetic + potential.value(&m, masses, &state.positions)?)
}

/// Angular momentum about the polar axis: `Σ m sn² φ̇` in 2D and
/// `Σ m sn² sin²φ θ̇` in 3D.
pub fn angular_momentum(state: &SystemState, masses: &[f64], kappa: Curvature) -> f64 {
    let d = state.dim;
    masses
        .iter()
        .enumerate()
        .map(|(r, &mass)| {
            let p = &state.positions[r * d..(r + 1) * d];
            let v = &state.velocities[r * d..(r + 1) * d];
            let sn2 = kappa.sn(p[0]).powi(2);
            if d == 2 {
                mass * sn2 * v[1]
            } else {
                mass * sn2 * p[1].sin().powi(2) * v[2]
            }
        })
        .sum()
}

/// Time derivative of [`energy`] along the vector field, given the chart
/// accelerations at `state`. Vanishes identically for exact solutions.
pub fn energy_rate(
    state: &SystemState,
    acc: &[f64],
    masses: &[f64],
    kappa: Curvature,
    potential: &dyn ChartPotential,
) -> Result<f64> {
    let d = state.dim;
    let grad = potential_gradient(state, masses, kappa, potential)?;
    let mut rate: f64 = grad.iter().zip(&state.velocities).map(|(g, v)| g * v).sum();
    for (r, &mass) in masses.iter().enumerate() {
        let i = r * d;
        let p = &state.positions[i..i + d];
        let v = &state.velocities[i..i + d];
        let a = &acc[i..i + d];
        let (n, c) = (kappa.sn(p[0]), kappa.csn(p[0]));
        let mut t = v[0] * a[0] + n * c * v[0] * v[1] * v[1] + n * n * v[1] * a[1];
        if d == 3 {
            let (sp, cp) = p[1].sin_cos();
            t += n * c * v[0] * sp * sp * v[2] * v[2]
                + n * n * sp * cp * v[1] * v[2] * v[2]
                + n * n * sp * sp * v[2] * a[2];
        }
        rate += mass * t;
    }
    Ok(rate)
}

/// Time derivative of [`angular_momentum`] along the vector field.
pub fn angular_momentum_rate(state: &SystemState, acc: &[f64], masses: &[f64], kappa: Curvature) -> f64 {
    let d = state.dim;
    masses
        .iter()
        .enumerate()
        .map(|(r, &mass)| {
            let i = r * d;
            let p = &state.positions[i..i + d];
            let v = &state.velocities[i..i + d];
            let a = &acc[i..i + d];
            let (n, c) = (kappa.sn(p[0]), kappa.csn(p[0]));
            if d == 2 {
                mass * (2.0 * n * c * v[0] * v[1] + n * n * a[1])
            } else {
                let (sp, cp) = p[1].sin_cos();
                mass * (2.0 * n * c * v[0] * sp * sp * v[2]
                    + 2.0 * n * n * sp * cp * v[1] * v[2]
                    + n * n * sp * sp * a[2])
            }
        })
        .sum()
}

/// The curved N-body problem as a first-order system `y = [positions, velocities]`.
pub struct CurvedSystem<P: ChartPotential> {
    manifold: ManifoldSpec,
    masses: Vec<f64>,
    potential: P,
}

impl<P: ChartPotential> CurvedSystem<P> {
    pub fn new(manifold: ManifoldSpec, masses: Vec<f64>, potential: P) -> Result<Self> {
        validate_masses(&masses)?;
        if masses.is_empty() {
            return Err(Error::invalid("at least one body required"));
        }
        Ok(CurvedSystem { manifold, masses, potential })
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn potential(&self) -> &P {
        &self.potential
    }

    pub fn rhs(&self, state: &SystemState) -> Result<VectorFieldEval> {
        rhs_curved(state, &self.masses, self.manifold.kappa(), &self.potential)
    }

    pub fn energy(&self, state: &SystemState) -> Result<f64> {
        energy(state, &self.masses, self.manifold.kappa(), &self.potential)
    }

    pub fn angular_momentum(&self, state: &SystemState) -> f64 {
        angular_momentum(state, &self.masses, self.manifold.kappa())
    }

    /// Chart-regularity and singular-set check of a packed state.
    pub fn check_state(&self, positions: &[f64]) -> Result<()> {
        let d = self.manifold.dim();
        if positions.len() != self.masses.len() * d {
            return Err(Error::invalid("state size does not match the number of bodies"));
        }
        for p in positions.chunks(d) {
            radial(self.manifold.kappa(), p[0])?;
            if d == 3 {
                polar_sin_cos(p[1])?;
            }
        }
        self.potential.admissible(&self.manifold, positions)
    }
}

impl<P: ChartPotential> OdeSystem for CurvedSystem<P> {
    fn derivative(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let half = y.len() / 2;
        let state = SystemState::from_vector(t, self.manifold.dim(), y);
        let acc = self.rhs(&state)?;
        dy[..half].copy_from_slice(&y[half..]);
        dy[half..].copy_from_slice(&acc.accelerations);
        Ok(())
    }

    fn admissible(&self, y: &[f64]) -> Result<()> {
        self.check_state(&y[..y.len() / 2])
    }
}

/// Newtonian N-body problem in Cartesian coordinates, `y = [x, ẋ]`.
pub struct NewtonianSystem {
    pub dim: usize,
    pub masses: Vec<f64>,
    /// When false the bodies move freely.
    pub interacting: bool,
}

impl OdeSystem for NewtonianSystem {
    fn derivative(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let half = y.len() / 2;
        dy[..half].copy_from_slice(&y[half..]);
        if self.interacting {
            dy[half..].copy_from_slice(&rhs_newton_cartesian(&y[..half], &self.masses, self.dim)?);
        } else {
            dy[half..].iter_mut().for_each(|a| *a = 0.0);
        }
        Ok(())
    }
}
