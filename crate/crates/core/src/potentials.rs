//! The cotangent gravitational potential and its flat limit.
//!
//! For bodies on `M_κ` the potential is
//!
//! ```text
//! U_κ = -Σ_{i<j} m_i m_j ctn_κ(d_ij)
//!     = -Σ_{i<j} m_i m_j (2 - κ q_ij²) / (q_ij (4 - κ q_ij²)^{1/2})
//! ```
//!
//! where `d_ij` is the geodesic and `q_ij` the ambient chordal distance. The
//! chordal form is the production path: it is regular at `κ = 0`, where it is
//! exactly the Newtonian `-Σ m_i m_j / q_ij`. The geodesic and ambient forms
//! are kept as independent evaluation routes.

use serde::{Deserialize, Serialize};

use crate::continuation::{fit_loglog_slope, SlopeFit};
use crate::error::{Error, Result};
use crate::geometry::{
    self, chart_to_extrinsic, chordal_distance, direction, direction_partials, ChartPoint,
    ChordalPoint, Frame, ManifoldSpec,
};
use crate::ktrig::Curvature;

/// Default chordal tolerance for collision / antipodal detection.
pub const SINGULARITY_TOLERANCE: f64 = 1e-9;

/// Masses and positions of the bodies on one manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct BodySystem {
    manifold: ManifoldSpec,
    masses: Vec<f64>,
    coords: Vec<f64>,
}

impl BodySystem {
    pub fn new(manifold: ManifoldSpec, masses: Vec<f64>, positions: &[ChartPoint]) -> Result<Self> {
        if masses.len() != positions.len() {
            return Err(Error::invalid(format!(
                "{} masses but {} positions",
                masses.len(),
                positions.len()
            )));
        }
        validate_masses(&masses)?;
        let mut coords = Vec::with_capacity(positions.len() * manifold.dim());
        for p in positions {
            manifold.validate_point(p)?;
            coords.extend(p.to_vec());
        }
        Ok(BodySystem { manifold, masses, coords })
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Flat chart coordinates, `dim` per body.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn position(&self, r: usize) -> ChartPoint {
        let d = self.manifold.dim();
        ChartPoint::from_slice(&self.coords[r * d..(r + 1) * d]).expect("dimension 2 or 3")
    }

    pub fn positions(&self) -> Vec<ChartPoint> {
        (0..self.len()).map(|r| self.position(r)).collect()
    }
}

pub(crate) fn validate_masses(masses: &[f64]) -> Result<()> {
    for (r, m) in masses.iter().enumerate() {
        if !(m.is_finite() && *m > 0.0) {
            return Err(Error::invalid(format!("body {r}: mass must be positive, got {m}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularityKind {
    Collision,
    Antipodal,
}

impl std::fmt::Display for SingularityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SingularityKind::Collision => "collision",
            SingularityKind::Antipodal => "antipodal",
        })
    }
}

/// A pair of bodies in the singular set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub i: usize,
    pub j: usize,
    pub kind: SingularityKind,
    /// Chordal distance of the pair.
    pub value: f64,
}

fn pair_slices(coords: &[f64], dim: usize, i: usize) -> &[f64] {
    &coords[i * dim..(i + 1) * dim]
}

pub(crate) fn singularities_raw(
    kappa: Curvature,
    dim: usize,
    coords: &[f64],
    tol: f64,
) -> Vec<SingularityReport> {
    let n = coords.len() / dim;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let q2 = geometry::chord_sq(kappa, pair_slices(coords, dim, i), pair_slices(coords, dim, j));
            let q = q2.max(0.0).sqrt();
            if q < tol {
                out.push(SingularityReport { i, j, kind: SingularityKind::Collision, value: q });
            } else if kappa.value() > 0.0 && 4.0 - kappa.value() * q2 < tol {
                out.push(SingularityReport { i, j, kind: SingularityKind::Antipodal, value: q });
            }
        }
    }
    out
}

/// All pairs that collide or, on spheres, are antipodal.
pub fn detect_singularities(sys: &BodySystem, tol: f64) -> Vec<SingularityReport> {
    singularities_raw(sys.manifold.kappa(), sys.manifold.dim(), &sys.coords, tol)
}

fn ensure_regular(kappa: Curvature, dim: usize, coords: &[f64]) -> Result<()> {
    let reports = singularities_raw(kappa, dim, coords, SINGULARITY_TOLERANCE);
    if reports.is_empty() {
        Ok(())
    } else {
        Err(Error::Singular(reports))
    }
}

/// `ctn_κ` of the geodesic distance subtending a chord of length `q`.
#[inline]
fn pair_ctn_from_chord(kappa: f64, q: f64) -> f64 {
    let kq2 = kappa * q * q;
    (2.0 - kq2) / (q * (4.0 - kq2).sqrt())
}

pub(crate) fn cotangent_value_raw(kappa: Curvature, dim: usize, masses: &[f64], coords: &[f64]) -> Result<f64> {
    ensure_regular(kappa, dim, coords)?;
    let n = masses.len();
    let mut u = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let q = geometry::chord_sq(kappa, pair_slices(coords, dim, i), pair_slices(coords, dim, j))
                .sqrt();
            u -= masses[i] * masses[j] * pair_ctn_from_chord(kappa.value(), q);
        }
    }
    Ok(u)
}

/// Analytic chart gradient of the chordal-form potential, accumulated into `grad`.
///
/// `∂U/∂x = m_i m_j / (2 q³ c³) ∂(q²)/∂x` with `c = (1 - κ q²/4)^{1/2}`,
/// which reduces to the Newtonian gradient at `κ = 0`.
pub(crate) fn cotangent_gradient_raw(
    kappa: Curvature,
    dim: usize,
    masses: &[f64],
    coords: &[f64],
    grad: &mut [f64],
) -> Result<()> {
    ensure_regular(kappa, dim, coords)?;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let k = kappa.value();
    let n = masses.len();

    // per-body geometric data: sn, csn, sn²(s/2), direction, angular partials
    struct Body {
        sn: f64,
        csn: f64,
        half: f64,
        u: [f64; 3],
        du: [[f64; 3]; 2],
    }
    let bodies: Vec<Body> = (0..n)
        .map(|r| {
            let c = pair_slices(coords, dim, r);
            let h = kappa.sn(0.5 * c[0]);
            Body {
                sn: kappa.sn(c[0]),
                csn: kappa.csn(c[0]),
                half: h * h,
                u: direction(&c[1..]),
                du: direction_partials(&c[1..]),
            }
        })
        .collect();

    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&bodies[i], &bodies[j]);
            let mut diff = [0.0; 3];
            for (c, d) in diff.iter_mut().enumerate() {
                *d = a.sn * a.u[c] - b.sn * b.u[c];
            }
            let dh = a.half - b.half;
            let q2 = diff.iter().map(|d| d * d).sum::<f64>() + 4.0 * k * dh * dh;
            let q = q2.sqrt();
            let c = (1.0 - 0.25 * k * q2).sqrt();
            let coef = masses[i] * masses[j] / (2.0 * q * q * q * c * c * c);

            let dot = |v: &[f64; 3]| diff[0] * v[0] + diff[1] * v[1] + diff[2] * v[2];

            // d(q²)/ds for each body of the pair
            let ds_i = 2.0 * a.csn * dot(&a.u) + 4.0 * k * dh * a.sn;
            let ds_j = -2.0 * b.csn * dot(&b.u) - 4.0 * k * dh * b.sn;
            grad[i * dim] += coef * ds_i;
            grad[j * dim] += coef * ds_j;
            for ang in 0..dim - 1 {
                grad[i * dim + 1 + ang] += coef * 2.0 * a.sn * dot(&a.du[ang]);
                grad[j * dim + 1 + ang] -= coef * 2.0 * b.sn * dot(&b.du[ang]);
            }
        }
    }
    Ok(())
}

/// Cotangent potential, evaluated through the on-manifold chordal form.
///
/// At `κ = 0` this is the Newtonian potential of the flat chart.
pub fn u_cotangent(sys: &BodySystem) -> Result<f64> {
    cotangent_value_raw(sys.manifold.kappa(), sys.manifold.dim(), &sys.masses, &sys.coords)
}

/// Cotangent potential through geodesic distances, `-Σ m_i m_j ctn_κ(d_ij)`.
pub fn u_cotangent_geodesic(sys: &BodySystem) -> Result<f64> {
    let m = &sys.manifold;
    if m.kappa().is_flat() {
        return Err(Error::invalid("geodesic cotangent form requires kappa != 0"));
    }
    ensure_regular(m.kappa(), m.dim(), &sys.coords)?;
    let ps = sys.positions();
    let mut u = 0.0;
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            let d = geometry::geodesic_distance(m, &ps[i], &ps[j])?;
            u -= sys.masses[i] * sys.masses[j] * m.kappa().ctn(d)?;
        }
    }
    Ok(u)
}

/// Cotangent potential in ambient variables: uses the centre-origin position
/// vectors `q_i` and their chords, without assuming `κ q_i² = 1`.
pub fn u_cotangent_ambient(sys: &BodySystem) -> Result<f64> {
    let m = &sys.manifold;
    if m.kappa().is_flat() {
        return Err(Error::invalid("ambient cotangent form requires kappa != 0"));
    }
    ensure_regular(m.kappa(), m.dim(), &sys.coords)?;
    let k = m.kappa().value();
    let qs = sys
        .positions()
        .iter()
        .map(|p| chart_to_extrinsic(m, p, Frame::CenterOrigin))
        .collect::<Result<Vec<_>>>()?;
    let mut u = 0.0;
    for i in 0..qs.len() {
        for j in i + 1..qs.len() {
            let qi2 = qs[i].dot(&qs[i]);
            let qj2 = qs[j].dot(&qs[j]);
            let qij = chordal_distance(&qs[i], &qs[j])?;
            let qij2 = qij * qij;
            let num = k * qi2 + k * qj2 - k * qij2;
            let den = 2.0 * (k * qi2 + k * qj2) * qij2 - k * (qi2 - qj2).powi(2) - k * qij2 * qij2;
            u -= sys.masses[i] * sys.masses[j] * num / den.sqrt();
        }
    }
    Ok(u)
}

/// Newtonian potential `-Σ m_i m_j / |q_i - q_j|` of a flat-chart system.
pub fn u_newton(sys: &BodySystem) -> Result<f64> {
    if !sys.manifold.kappa().is_flat() {
        return Err(Error::invalid("Newtonian potential requires a kappa = 0 system"));
    }
    let xs: Vec<Vec<f64>> = sys.positions().iter().map(geometry::chart_to_flat).collect();
    newton_value_cartesian(&xs.concat(), sys.manifold.dim(), &sys.masses)
}

pub(crate) fn newton_value_cartesian(x: &[f64], dim: usize, masses: &[f64]) -> Result<f64> {
    let n = masses.len();
    let mut u = 0.0;
    let mut reports = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = (0..dim)
                .map(|c| (x[i * dim + c] - x[j * dim + c]).powi(2))
                .sum::<f64>()
                .sqrt();
            if d < SINGULARITY_TOLERANCE {
                reports.push(SingularityReport { i, j, kind: SingularityKind::Collision, value: d });
            }
            u -= masses[i] * masses[j] / d;
        }
    }
    if reports.is_empty() {
        Ok(u)
    } else {
        Err(Error::Singular(reports))
    }
}

/// Analytic chart gradient of [`u_cotangent`], flattened `dim` entries per body.
pub fn grad_chart(sys: &BodySystem) -> Result<Vec<f64>> {
    let mut g = vec![0.0; sys.coords.len()];
    cotangent_gradient_raw(sys.manifold.kappa(), sys.manifold.dim(), &sys.masses, &sys.coords, &mut g)?;
    Ok(g)
}

/// A potential as seen by the equations of motion: value and chart gradient
/// over flat chart coordinates.
pub trait ChartPotential: Sync {
    fn value(&self, m: &ManifoldSpec, masses: &[f64], coords: &[f64]) -> Result<f64>;

    fn gradient(&self, m: &ManifoldSpec, masses: &[f64], coords: &[f64], grad: &mut [f64]) -> Result<()>;

    /// Checks that the configuration lies off the singular set.
    fn admissible(&self, _m: &ManifoldSpec, _coords: &[f64]) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    /// No interaction: bodies follow geodesics.
    None,
    /// Cotangent potential (Newtonian at `κ = 0`).
    Cotangent,
    /// Newtonian potential; only valid on the flat chart.
    Newton,
}

impl Potential {
    fn check_manifold(&self, m: &ManifoldSpec) -> Result<()> {
        if *self == Potential::Newton && !m.kappa().is_flat() {
            return Err(Error::invalid("Newtonian potential requires kappa = 0"));
        }
        Ok(())
    }
}

impl ChartPotential for Potential {
    fn value(&self, m: &ManifoldSpec, masses: &[f64], coords: &[f64]) -> Result<f64> {
        self.check_manifold(m)?;
        match self {
            Potential::None => Ok(0.0),
            Potential::Cotangent | Potential::Newton => {
                cotangent_value_raw(m.kappa(), m.dim(), masses, coords)
            }
        }
    }

    fn gradient(&self, m: &ManifoldSpec, masses: &[f64], coords: &[f64], grad: &mut [f64]) -> Result<()> {
        self.check_manifold(m)?;
        match self {
            Potential::None => {
                grad.iter_mut().for_each(|g| *g = 0.0);
                Ok(())
            }
            Potential::Cotangent | Potential::Newton => {
                cotangent_gradient_raw(m.kappa(), m.dim(), masses, coords, grad)
            }
        }
    }

    fn admissible(&self, m: &ManifoldSpec, coords: &[f64]) -> Result<()> {
        match self {
            Potential::None => Ok(()),
            _ => ensure_regular(m.kappa(), m.dim(), coords),
        }
    }
}

/// One row of a potential-continuity table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub kappa: f64,
    pub u_kappa: f64,
    pub u_flat: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityTable {
    pub rows: Vec<ContinuityRow>,
    /// Least-squares slope of `log |U_κ - U_0|` against `log |κ|`.
    pub fit: Option<SlopeFit>,
}

/// `|U_κ - U_0|` for a configuration held at fixed chords from the pole.
pub fn potential_continuity(
    chords: &[ChordalPoint],
    masses: &[f64],
    kappas: &[f64],
) -> Result<ContinuityTable> {
    validate_masses(masses)?;
    if chords.len() != masses.len() || chords.is_empty() {
        return Err(Error::invalid("need one chordal position per mass"));
    }
    let dim = if chords[0].theta.is_some() { 3 } else { 2 };
    let build = |kappa: f64| -> Result<BodySystem> {
        let m = ManifoldSpec::new(dim, kappa)?;
        let ps = chords.iter().map(|c| c.to_chart(m.kappa())).collect::<Result<Vec<_>>>()?;
        BodySystem::new(m, masses.to_vec(), &ps)
    };
    let u_flat = u_newton(&build(0.0)?)?;
    let mut rows = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        if kappa == 0.0 {
            return Err(Error::invalid("kappa list must exclude 0"));
        }
        let u_kappa = u_cotangent(&build(kappa)?)?;
        rows.push(ContinuityRow { kappa, u_kappa, u_flat, error: (u_kappa - u_flat).abs() });
    }
    let fit = fit_loglog_slope(
        &rows.iter().map(|r| r.kappa.abs()).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error).collect::<Vec<_>>(),
    );
    Ok(ContinuityTable { rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn sys2(k: f64, masses: Vec<f64>, ps: &[(f64, f64)]) -> BodySystem {
        let m = ManifoldSpec::new(2, k).unwrap();
        let ps: Vec<_> = ps.iter().map(|&(s, p)| ChartPoint::planar(s, p)).collect();
        BodySystem::new(m, masses, &ps).unwrap()
    }

    #[test]
    fn cotangent_examples() {
        // equatorial pair at right angles: d = π/2
        let s = sys2(1.0, vec![1.0, 1.0], &[(FRAC_PI_2, 0.0), (FRAC_PI_2, FRAC_PI_2)]);
        assert!(u_cotangent(&s).unwrap().abs() < 1e-15);
        assert!(u_cotangent_geodesic(&s).unwrap().abs() < 1e-15);
        // pole and a point at s = π/4: d = π/4
        let s = sys2(1.0, vec![1.0, 1.0], &[(0.0, 0.0), (FRAC_PI_4, 1.0)]);
        assert_relative_eq!(u_cotangent(&s).unwrap(), -1.0, epsilon = 1e-15);
        assert_relative_eq!(u_cotangent_geodesic(&s).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn chordal_form_at_right_angle_chord() {
        // q = √2 on the unit sphere: (2 - 2) / (√2 · √2) = 0
        assert!(pair_ctn_from_chord(1.0, 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn newton_examples() {
        let s = sys2(0.0, vec![1.0, 1.0], &[(1.0, 0.0), (1.0, PI)]);
        assert_relative_eq!(u_newton(&s).unwrap(), -0.5, epsilon = 1e-15);
        let s = sys2(0.0, vec![2.0, 3.0], &[(0.0, 0.0), (1.0, 0.3)]);
        assert_relative_eq!(u_newton(&s).unwrap(), -6.0, epsilon = 1e-15);
        let r = 1.0 / 3f64.sqrt();
        let s = sys2(
            0.0,
            vec![1.0; 3],
            &[(r, 0.0), (r, 2.0 * PI / 3.0), (r, 4.0 * PI / 3.0)],
        );
        assert_relative_eq!(u_newton(&s).unwrap(), -3.0, epsilon = 1e-14);
        assert_relative_eq!(u_cotangent(&s).unwrap(), -3.0, epsilon = 1e-14);
    }

    #[test]
    fn newton_rejects_curved_and_collisions() {
        let s = sys2(1.0, vec![1.0, 1.0], &[(1.0, 0.0), (1.0, PI)]);
        assert!(u_newton(&s).is_err());
        let s = sys2(0.0, vec![1.0, 1.0], &[(1.0, 0.5), (1.0, 0.5)]);
        assert!(matches!(u_newton(&s), Err(Error::Singular(_))));
    }

    #[test]
    fn gradient_antisymmetry_in_relative_angle() {
        let s = sys2(-0.7, vec![1.3, 0.4], &[(0.9, 0.2), (0.9, 2.1)]);
        let g = grad_chart(&s).unwrap();
        assert_relative_eq!(g[1], -g[3], max_relative = 1e-14);
    }

    #[test]
    fn equatorial_gradient_magnitude() {
        let s = sys2(1.0, vec![1.0, 1.0], &[(FRAC_PI_2, 0.0), (FRAC_PI_2, FRAC_PI_2)]);
        let g = grad_chart(&s).unwrap();
        assert_relative_eq!(g[1].abs(), 1.0, epsilon = 1e-14);
        // finite-difference confirmation of ∂U/∂φ_1
        let h = 1e-6;
        let up = sys2(1.0, vec![1.0, 1.0], &[(FRAC_PI_2, h), (FRAC_PI_2, FRAC_PI_2)]);
        let dn = sys2(1.0, vec![1.0, 1.0], &[(FRAC_PI_2, -h), (FRAC_PI_2, FRAC_PI_2)]);
        let fd = (u_cotangent(&up).unwrap() - u_cotangent(&dn).unwrap()) / (2.0 * h);
        assert_relative_eq!(g[1], fd, max_relative = 1e-8);
    }

    #[test]
    fn singularity_detection() {
        let s = sys2(1.0, vec![1.0, 1.0], &[(0.5, 1.0), (0.5, 1.0)]);
        let r = detect_singularities(&s, SINGULARITY_TOLERANCE);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].kind, SingularityKind::Collision);

        let s = sys2(1.0, vec![1.0, 1.0], &[(FRAC_PI_2, 0.0), (FRAC_PI_2, PI)]);
        let r = detect_singularities(&s, SINGULARITY_TOLERANCE);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].kind, SingularityKind::Antipodal);
        assert_relative_eq!(r[0].value, 2.0, epsilon = 1e-15);
        assert!(matches!(u_cotangent(&s), Err(Error::Singular(_))));

        let s = sys2(-1.0, vec![1.0, 1.0], &[(FRAC_PI_2, 0.0), (FRAC_PI_2, PI)]);
        assert!(detect_singularities(&s, SINGULARITY_TOLERANCE).is_empty());
    }

    #[test]
    fn mass_validation_names_body() {
        let m = ManifoldSpec::new(2, 1.0).unwrap();
        let err = BodySystem::new(m, vec![1.0, -2.0], &[ChartPoint::planar(0.1, 0.0), ChartPoint::planar(0.2, 0.0)])
            .unwrap_err();
        assert!(err.to_string().contains("body 1"));
    }

    #[test]
    fn continuity_single_tiny_kappa() {
        let chords = [ChordalPoint::planar(0.0, 0.0), ChordalPoint::planar(1.0, 0.0)];
        let t = potential_continuity(&chords, &[1.0, 1.0], &[1e-8]).unwrap();
        let row = t.rows[0];
        assert!(row.error <= 1e-7 * row.u_flat.abs(), "{row:?}");
    }

    #[test]
    fn continuity_decreases_monotonically() {
        let chords = [ChordalPoint::planar(0.0, 0.0), ChordalPoint::planar(1.0, 0.0)];
        let kappas: Vec<f64> = (1..=6).map(|e| 10f64.powi(-e)).collect();
        let t = potential_continuity(&chords, &[1.0, 1.0], &kappas).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[1].error < w[0].error);
        }
        let fit = t.fit.unwrap();
        assert!((fit.slope - 1.0).abs() <= 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn continuity_rejects_zero_kappa() {
        let chords = [ChordalPoint::planar(0.0, 0.0), ChordalPoint::planar(1.0, 0.0)];
        assert!(potential_continuity(&chords, &[1.0, 1.0], &[0.0]).is_err());
    }
}
