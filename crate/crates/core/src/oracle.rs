//! General Lagrangian equations of motion with numerically differentiated
//! metrics.
//!
//! Given a metric tensor `G_r` for each body and a potential `U`, the motion is
//!
//! ```text
//! m_r ẍ_s = -Σ_i g^{si} ∂U/∂x_i  -  m_r Σ_{l,j} Γ^s_{lj} ẋ_l ẋ_j
//! Γ^s_{lj} = ½ Σ_i g^{si} (∂_j g_{il} + ∂_l g_{ij} - ∂_i g_{lj})
//! ```
//!
//! Everything here uses central differences of the metric and potential, so it
//! shares no closed forms with [`crate::geometry`] or [`crate::dynamics`] and
//! serves as an independent check on both.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{Christoffel, ManifoldSpec};
use crate::ktrig::Curvature;
use crate::potentials::{cotangent_value_raw, validate_masses};

/// Relative finite-difference step; the absolute step for coordinate `x` is
/// `DEFAULT_STEP * max(1, |x|)`.
pub const DEFAULT_STEP: f64 = 1e-5;

const SYMMETRY_TOLERANCE: f64 = 1e-14;
const KRONECKER_TOLERANCE: f64 = 1e-10;

/// Metric tensor of one body's configuration slot.
pub trait MetricField: Sync {
    fn dim(&self) -> usize;
    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

/// Scalar potential over the flattened configuration of all bodies.
pub trait PotentialField: Sync {
    fn value(&self, config: &[f64]) -> Result<f64>;

    fn gradient(&self, config: &[f64]) -> Result<Vec<f64>> {
        let mut x = config.to_vec();
        let mut g = vec![0.0; x.len()];
        for k in 0..x.len() {
            let h = step_for(DEFAULT_STEP, config[k]);
            x[k] = config[k] + h;
            let up = self.value(&x)?;
            x[k] = config[k] - h;
            let dn = self.value(&x)?;
            x[k] = config[k];
            g[k] = (up - dn) / (2.0 * h);
        }
        Ok(g)
    }
}

#[inline]
fn step_for(rel: f64, x: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Metric from a closure.
pub struct FnMetric<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> DMatrix<f64> + Sync> FnMetric<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnMetric { dim, f }
    }
}

impl<F: Fn(&[f64]) -> DMatrix<f64> + Sync> MetricField for FnMetric<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok((self.f)(x))
    }
}

/// The line element of the geodesic-polar / hyperspherical chart of `M_κ`,
/// `ds² + sn²(s) dφ² [+ sn²(s) sin²φ dθ²]`.
pub struct ChartMetric {
    manifold: ManifoldSpec,
}

impl ChartMetric {
    pub fn new(manifold: ManifoldSpec) -> Self {
        ChartMetric { manifold }
    }
}

impl MetricField for ChartMetric {
    fn dim(&self) -> usize {
        self.manifold.dim()
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n2 = self.manifold.kappa().sn(x[0]).powi(2);
        let mut g = DMatrix::zeros(self.dim(), self.dim());
        g[(0, 0)] = 1.0;
        g[(1, 1)] = n2;
        if self.dim() == 3 {
            g[(2, 2)] = n2 * x[1].sin().powi(2);
        }
        Ok(g)
    }
}

/// `U ≡ 0`.
pub struct ZeroPotential;

impl PotentialField for ZeroPotential {
    fn value(&self, _config: &[f64]) -> Result<f64> {
        Ok(0.0)
    }

    fn gradient(&self, config: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; config.len()])
    }
}

/// Cotangent potential value; the gradient is left to finite differences.
pub struct CotangentField {
    kappa: Curvature,
    dim: usize,
    masses: Vec<f64>,
}

impl CotangentField {
    pub fn new(manifold: ManifoldSpec, masses: Vec<f64>) -> Self {
        CotangentField { kappa: manifold.kappa(), dim: manifold.dim(), masses }
    }
}

impl PotentialField for CotangentField {
    fn value(&self, config: &[f64]) -> Result<f64> {
        cotangent_value_raw(self.kappa, self.dim, &self.masses, config)
    }
}

/// Evaluates the metric and enforces `g_ij = g_ji`.
fn checked_metric(field: &dyn MetricField, x: &[f64]) -> Result<DMatrix<f64>> {
    let g = field.metric(x)?;
    let n = field.dim();
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::invalid("metric has the wrong shape"));
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((g[(i, j)] - g[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOLERANCE * g.amax().max(1.0) {
        return Err(Error::MetricAsymmetric(worst));
    }
    Ok((&g + g.transpose()) * 0.5)
}

fn invert(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = g.clone().try_inverse().ok_or(Error::MetricNotInvertible)?;
    if inv.iter().all(|v| v.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::MetricNotInvertible)
    }
}

/// Central-difference partials `∂_k g` of the metric at `p`.
fn metric_partials(field: &dyn MetricField, p: &[f64], step: f64) -> Result<Vec<DMatrix<f64>>> {
    let mut x = p.to_vec();
    (0..p.len())
        .map(|k| {
            let h = step_for(step, p[k]);
            x[k] = p[k] + h;
            let up = checked_metric(field, &x)?;
            x[k] = p[k] - h;
            let dn = checked_metric(field, &x)?;
            x[k] = p[k];
            Ok((up - dn) / (2.0 * h))
        })
        .collect()
}

/// Connection coefficients of an arbitrary metric by central differences.
pub fn christoffel_numeric(metric: &dyn MetricField, p: &[f64], step: f64) -> Result<Christoffel> {
    let n = metric.dim();
    if p.len() != n {
        return Err(Error::invalid("point dimension does not match the metric"));
    }
    let ginv = invert(&checked_metric(metric, p)?)?;
    let dg = metric_partials(metric, p, step)?;
    let mut gamma = Christoffel::zeros(n);
    for s in 0..n {
        for l in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += ginv[(s, i)] * (dg[j][(i, l)] + dg[l][(i, j)] - dg[i][(l, j)]);
                }
                gamma.set(s, l, j, 0.5 * acc);
            }
        }
    }
    Ok(gamma)
}

/// Equations of motion of `N` bodies from per-body metrics and a potential.
pub struct LagrangeOracle<'a> {
    metrics: Vec<&'a dyn MetricField>,
    potential: &'a dyn PotentialField,
    masses: Vec<f64>,
    step: f64,
    checked: bool,
}

impl<'a> LagrangeOracle<'a> {
    pub fn new(
        metrics: Vec<&'a dyn MetricField>,
        potential: &'a dyn PotentialField,
        masses: Vec<f64>,
    ) -> Result<Self> {
        validate_masses(&masses)?;
        if metrics.len() != masses.len() {
            return Err(Error::invalid("one metric per body required"));
        }
        Ok(LagrangeOracle { metrics, potential, masses, step: DEFAULT_STEP, checked: false })
    }

    /// Bodies sharing one metric field.
    pub fn uniform(metric: &'a dyn MetricField, potential: &'a dyn PotentialField, masses: Vec<f64>) -> Result<Self> {
        let metrics = vec![metric; masses.len()];
        Self::new(metrics, potential, masses)
    }

    /// Enables the `Σ_i g^{si} g_{il} = δ_sl` assertion on every evaluation.
    pub fn checked(mut self, on: bool) -> Self {
        self.checked = on;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.metrics.len() + 1);
        off.push(0);
        for m in &self.metrics {
            off.push(off.last().unwrap() + m.dim());
        }
        off
    }

    /// Accelerations `ẍ` of every body, flattened in body order.
    pub fn eom_rhs_general(&self, positions: &[f64], velocities: &[f64]) -> Result<Vec<f64>> {
        let off = self.offsets();
        let total = *off.last().unwrap();
        if positions.len() != total || velocities.len() != total {
            return Err(Error::invalid("state size does not match the metrics"));
        }
        let grad = self.potential.gradient(positions)?;
        let mut acc = vec![0.0; total];
        for (r, field) in self.metrics.iter().enumerate() {
            let (a, b) = (off[r], off[r + 1]);
            let x = &positions[a..b];
            let v = &velocities[a..b];
            let g = checked_metric(*field, x)?;
            let ginv = invert(&g)?;
            if self.checked {
                let residual = (&ginv * &g - DMatrix::identity(b - a, b - a)).amax();
                if residual > KRONECKER_TOLERANCE {
                    return Err(Error::KroneckerResidual(residual));
                }
            }
            let gamma = christoffel_numeric(*field, x, self.step)?;
            let quad = gamma.contract(v);
            for s in 0..b - a {
                let mut force = 0.0;
                for i in 0..b - a {
                    force += ginv[(s, i)] * grad[a + i];
                }
                acc[a + s] = -force / self.masses[r] - quad[s];
            }
        }
        Ok(acc)
    }

    /// Residual of the Euler–Lagrange equations `d/dt ∂L/∂ẋ - ∂L/∂x` along
    /// uniformly sampled states, with five-point time derivatives.
    ///
    /// Returns one max-norm residual per interior sample (the first and last
    /// two samples have no centred stencil).
    pub fn euler_lagrange_residual(
        &self,
        times: &[f64],
        positions: &[Vec<f64>],
        velocities: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        let n = times.len();
        if n < 5 {
            return Err(Error::InsufficientSamples { needed: 5, got: n });
        }
        if positions.len() != n || velocities.len() != n {
            return Err(Error::invalid("one position and velocity per sample required"));
        }
        let dt = times[1] - times[0];
        if dt.is_nan() || dt <= 0.0 || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
            return Err(Error::invalid("samples must be uniformly spaced in time"));
        }
        let off = self.offsets();
        let total = *off.last().unwrap();

        // generalized momenta p_i = m g_il ẋ_l at every sample
        let momenta = (0..n)
            .map(|k| {
                let mut p = vec![0.0; total];
                for (r, field) in self.metrics.iter().enumerate() {
                    let (a, b) = (off[r], off[r + 1]);
                    let g = checked_metric(*field, &positions[k][a..b])?;
                    for i in 0..b - a {
                        p[a + i] = self.masses[r]
                            * (0..b - a).map(|l| g[(i, l)] * velocities[k][a + l]).sum::<f64>();
                    }
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut out = Vec::with_capacity(n - 4);
        for k in 2..n - 2 {
            let grad_u = self.potential.gradient(&positions[k])?;
            let mut worst: f64 = 0.0;
            for (r, field) in self.metrics.iter().enumerate() {
                let (a, b) = (off[r], off[r + 1]);
                let x = &positions[k][a..b];
                let v = &velocities[k][a..b];
                let dg = metric_partials(*field, x, self.step)?;
                for i in 0..b - a {
                    let dp = (momenta[k - 2][a + i] - 8.0 * momenta[k - 1][a + i]
                        + 8.0 * momenta[k + 1][a + i]
                        - momenta[k + 2][a + i])
                        / (12.0 * dt);
                    let mut dl = 0.0;
                    for l in 0..b - a {
                        for j in 0..b - a {
                            dl += dg[i][(l, j)] * v[l] * v[j];
                        }
                    }
                    let dl_dx = 0.5 * self.masses[r] * dl - grad_u[a + i];
                    worst = worst.max((dp - dl_dx).abs());
                }
            }
            out.push(worst);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_4;

    fn identity(dim: usize) -> FnMetric<impl Fn(&[f64]) -> DMatrix<f64> + Sync> {
        FnMetric::new(dim, move |_x: &[f64]| DMatrix::identity(dim, dim))
    }

    #[test]
    fn constant_metric_has_zero_connection() {
        let g = christoffel_numeric(&identity(3), &[0.4, -2.0, 7.0], DEFAULT_STEP).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn curved_chart_matches_closed_value() {
        let m = ChartMetric::new(ManifoldSpec::new(2, 1.0).unwrap());
        let g = christoffel_numeric(&m, &[FRAC_PI_4, 0.0], DEFAULT_STEP).unwrap();
        assert_relative_eq!(g.get(0, 1, 1), -0.5, epsilon = 1e-6);
    }

    #[test]
    fn flat_polar_hand_expansion() {
        // g = diag(1, s²): Γ¹₂₂ = -½ ∂_s(s²) = -s, Γ²₁₂ = ½ s⁻² ∂_s(s²) = 1/s
        let polar = FnMetric::new(2, |x: &[f64]| {
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[0] * x[0]])
        });
        let g = christoffel_numeric(&polar, &[2.0, 0.3], DEFAULT_STEP).unwrap();
        assert_relative_eq!(g.get(0, 1, 1), -2.0, max_relative = 1e-9);
        assert_relative_eq!(g.get(1, 0, 1), 0.5, max_relative = 1e-9);
        assert_eq!(g.get(1, 0, 1), g.get(1, 1, 0));
    }

    #[test]
    fn free_flat_motion_has_no_acceleration() {
        let id = identity(2);
        let oracle = LagrangeOracle::uniform(&id, &ZeroPotential, vec![1.0, 3.0]).unwrap().checked(true);
        let acc = oracle.eom_rhs_general(&[1.0, 2.0, -3.0, 0.5], &[0.3, -1.0, 2.0, 4.0]).unwrap();
        assert!(acc.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn one_body_on_unit_sphere() {
        let m = ChartMetric::new(ManifoldSpec::new(2, 1.0).unwrap());
        let oracle = LagrangeOracle::uniform(&m, &ZeroPotential, vec![1.0]).unwrap().checked(true);
        let acc = oracle.eom_rhs_general(&[FRAC_PI_4, 0.2], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(acc[0], 0.5, epsilon = 1e-9);
        assert!(acc[1].abs() < 1e-12);
    }

    #[test]
    fn circular_free_motion_in_flat_polar() {
        let m = ChartMetric::new(ManifoldSpec::new(2, 0.0).unwrap());
        let oracle = LagrangeOracle::uniform(&m, &ZeroPotential, vec![1.0]).unwrap();
        let acc = oracle.eom_rhs_general(&[2.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(acc[0], 2.0, max_relative = 1e-9);
        assert!(acc[1].abs() < 1e-12);
    }

    #[test]
    fn asymmetric_metric_rejected() {
        let bad = FnMetric::new(2, |_x: &[f64]| DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]));
        assert!(matches!(
            christoffel_numeric(&bad, &[0.0, 0.0], DEFAULT_STEP),
            Err(Error::MetricAsymmetric(_))
        ));
    }

    #[test]
    fn singular_metric_rejected() {
        let m = ChartMetric::new(ManifoldSpec::new(2, 1.0).unwrap());
        assert!(christoffel_numeric(&m, &[0.0, 0.0], DEFAULT_STEP).is_err());
    }

    #[test]
    fn residual_needs_five_samples() {
        let m = ChartMetric::new(ManifoldSpec::new(2, 1.0).unwrap());
        let oracle = LagrangeOracle::uniform(&m, &ZeroPotential, vec![1.0]).unwrap();
        let t = [0.0, 0.1, 0.2, 0.3];
        let x = vec![vec![1.0, 0.0]; 4];
        assert!(matches!(
            oracle.euler_lagrange_residual(&t, &x, &x),
            Err(Error::InsufficientSamples { needed: 5, got: 4 })
        ));
    }

    #[test]
    fn equilibrium_has_zero_residual() {
        let m = ChartMetric::new(ManifoldSpec::new(2, 1.0).unwrap());
        let oracle = LagrangeOracle::uniform(&m, &ZeroPotential, vec![2.0]).unwrap();
        let t: Vec<f64> = (0..7).map(|k| k as f64 * 0.01).collect();
        let x = vec![vec![1.0, 0.5]; 7];
        let v = vec![vec![0.0, 0.0]; 7];
        let r = oracle.euler_lagrange_residual(&t, &x, &v).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|e| *e == 0.0));
    }
}
