//! Charts, embeddings, metrics and connection coefficients of the model
//! spaces `M_κ²` and `M_κ³`.
//!
//! Points are addressed by geodesic-polar coordinates `(s, φ)` in two
//! dimensions and hyperspherical coordinates `(s, φ, θ)` in three, where `s`
//! is the geodesic distance from the North Pole. In the ambient space the
//! surfaces are
//!
//! ```text
//! x² + y² (+ z²) + σ w² = κ⁻¹        (centre-origin frame)
//! ```
//!
//! with `σ = ±1` the signature of the ambient metric. Translating the last
//! coordinate by `-|κ|^{-1/2}` moves the pole to the origin; in that frame the
//! embedding has a regular limit as `κ → 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ktrig::Curvature;

/// `sn_κ(s)` or `sin φ` below this magnitude is treated as a chart singularity.
pub const CHART_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    dim: usize,
    kappa: Curvature,
}

impl ManifoldSpec {
    pub fn new(dim: usize, kappa: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        Ok(ManifoldSpec { dim, kappa: Curvature::new(kappa)? })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn kappa(&self) -> Curvature {
        self.kappa
    }

    /// Same dimension, different curvature.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        ManifoldSpec::new(self.dim, kappa)
    }

    /// Checks the coordinate ranges of a chart point on this manifold.
    pub fn validate_point(&self, p: &ChartPoint) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::invalid(format!(
                "chart point has dimension {}, manifold has {}",
                p.dim(),
                self.dim
            )));
        }
        let coords = p.to_vec();
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("chart coordinates must be finite"));
        }
        if p.s < 0.0 {
            return Err(Error::invalid(format!("radial coordinate s = {} is negative", p.s)));
        }
        let k = self.kappa.value();
        if k > 0.0 && p.s > std::f64::consts::PI / k.sqrt() * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "s = {} lies beyond the antipode of the pole (kappa = {k})",
                p.s
            )));
        }
        if self.dim == 3 && !(0.0..=std::f64::consts::PI).contains(&p.phi) {
            return Err(Error::invalid(format!("polar angle phi = {} outside [0, pi]", p.phi)));
        }
        Ok(())
    }
}

/// Intrinsic coordinates of one body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub s: f64,
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl ChartPoint {
    pub fn planar(s: f64, phi: f64) -> Self {
        ChartPoint { s, phi, theta: None }
    }

    pub fn spatial(s: f64, phi: f64, theta: f64) -> Self {
        ChartPoint { s, phi, theta: Some(theta) }
    }

    pub fn dim(&self) -> usize {
        if self.theta.is_some() {
            3
        } else {
            2
        }
    }

    pub fn from_slice(c: &[f64]) -> Result<Self> {
        match *c {
            [s, phi] => Ok(ChartPoint::planar(s, phi)),
            [s, phi, theta] => Ok(ChartPoint::spatial(s, phi, theta)),
            _ => Err(Error::invalid(format!("chart point needs 2 or 3 coordinates, got {}", c.len()))),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self.theta {
            Some(t) => vec![self.s, self.phi, t],
            None => vec![self.s, self.phi],
        }
    }
}

/// Which origin the ambient coordinates are measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// Origin at the North Pole; regular as `κ → 0`.
    PoleShifted,
    /// Origin at the centre of the sphere / hyperboloid.
    CenterOrigin,
}

/// Ambient coordinates `(x, y[, z], w)` with the signature of the ambient metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrinsicPoint {
    pub coords: Vec<f64>,
    pub sigma: f64,
}

impl ExtrinsicPoint {
    /// Signature-weighted inner product.
    pub fn dot(&self, other: &ExtrinsicPoint) -> f64 {
        let n = self.coords.len();
        let spatial: f64 = self.coords[..n - 1]
            .iter()
            .zip(&other.coords[..n - 1])
            .map(|(a, b)| a * b)
            .sum();
        spatial + self.sigma * self.coords[n - 1] * other.coords[n - 1]
    }
}

/// Position relative to the pole, stated by the ambient chord `τ` rather than
/// the geodesic distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordalPoint {
    pub tau: f64,
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl ChordalPoint {
    pub fn planar(tau: f64, phi: f64) -> Self {
        ChordalPoint { tau, phi, theta: None }
    }

    pub fn spatial(tau: f64, phi: f64, theta: f64) -> Self {
        ChordalPoint { tau, phi, theta: Some(theta) }
    }

    /// Chart point on `M_κ` at chordal distance `tau` from the pole.
    pub fn to_chart(&self, kappa: Curvature) -> Result<ChartPoint> {
        Ok(ChartPoint { s: chord_to_geodesic(kappa, self.tau)?, phi: self.phi, theta: self.theta })
    }

    pub fn from_chart(kappa: Curvature, p: &ChartPoint) -> Self {
        ChordalPoint { tau: geodesic_to_chord(kappa, p.s), phi: p.phi, theta: p.theta }
    }
}

/// Unit direction of the angular coordinates, padded to length 3.
#[inline]
pub(crate) fn direction(angles: &[f64]) -> [f64; 3] {
    match *angles {
        [phi] => {
            let (sp, cp) = phi.sin_cos();
            [cp, sp, 0.0]
        }
        [phi, theta] => {
            let (sp, cp) = phi.sin_cos();
            let (st, ct) = theta.sin_cos();
            [sp * st, sp * ct, cp]
        }
        _ => unreachable!("one or two angles"),
    }
}

/// Partial derivatives of [`direction`] with respect to each angle.
#[inline]
pub(crate) fn direction_partials(angles: &[f64]) -> [[f64; 3]; 2] {
    match *angles {
        [phi] => {
            let (sp, cp) = phi.sin_cos();
            [[-sp, cp, 0.0], [0.0; 3]]
        }
        [phi, theta] => {
            let (sp, cp) = phi.sin_cos();
            let (st, ct) = theta.sin_cos();
            [[cp * st, cp * ct, -sp], [sp * ct, -sp * st, 0.0]]
        }
        _ => unreachable!("one or two angles"),
    }
}

/// Height coordinate in the pole-shifted frame, `|κ|^{-1/2}(csn_κ s - 1)`,
/// written via the half-angle identity so it stays accurate for small κ.
#[inline]
pub(crate) fn pole_height(kappa: Curvature, s: f64) -> f64 {
    let k = kappa.value();
    if k == 0.0 {
        0.0
    } else {
        let h = kappa.sn(0.5 * s);
        -2.0 * k.signum() * k.abs().sqrt() * h * h
    }
}

/// Squared ambient chord between two chart points given as coordinate slices.
///
/// Uses `q² = |sn_a u_a - sn_b u_b|² + 4κ (h_a - h_b)²` with
/// `h = sn_κ²(s/2)`, which is exact on the manifold and free of the
/// cancellation in the centre-origin embedding.
pub(crate) fn chord_sq(kappa: Curvature, a: &[f64], b: &[f64]) -> f64 {
    let ua = direction(&a[1..]);
    let ub = direction(&b[1..]);
    let (na, nb) = (kappa.sn(a[0]), kappa.sn(b[0]));
    let mut q2 = 0.0;
    for k in 0..3 {
        let d = na * ua[k] - nb * ub[k];
        q2 += d * d;
    }
    let (ha, hb) = (kappa.sn(0.5 * a[0]), kappa.sn(0.5 * b[0]));
    let dh = ha * ha - hb * hb;
    q2 + 4.0 * kappa.value() * dh * dh
}

/// Embeds a chart point in the ambient space.
///
/// In the pole-shifted frame the flat case `κ = 0` is accepted and yields the
/// planar/spatial Cartesian point with last coordinate 0; the centre-origin
/// frame does not exist for `κ = 0`.
pub fn chart_to_extrinsic(m: &ManifoldSpec, p: &ChartPoint, frame: Frame) -> Result<ExtrinsicPoint> {
    m.validate_point(p)?;
    let kappa = m.kappa();
    let c = p.to_vec();
    let u = direction(&c[1..]);
    let n = kappa.sn(p.s);
    let mut coords: Vec<f64> = u[..m.dim()].iter().map(|ui| n * ui).collect();
    let last = match frame {
        Frame::PoleShifted => pole_height(kappa, p.s),
        Frame::CenterOrigin => {
            if kappa.is_flat() {
                return Err(Error::invalid("centre-origin embedding undefined for kappa = 0"));
            }
            kappa.csn(p.s) / kappa.value().abs().sqrt()
        }
    };
    coords.push(last);
    Ok(ExtrinsicPoint { coords, sigma: kappa.sigma() })
}

/// Cartesian point of a chart point in flat space (`κ = 0`).
pub fn chart_to_flat(p: &ChartPoint) -> Vec<f64> {
    let c = p.to_vec();
    let u = direction(&c[1..]);
    u[..p.dim()].iter().map(|ui| p.s * ui).collect()
}

/// Euclidean (`σ = 1`) or Minkowski (`σ = -1`) chord between ambient points.
pub fn chordal_distance(a: &ExtrinsicPoint, b: &ExtrinsicPoint) -> Result<f64> {
    if a.coords.len() != b.coords.len() || a.sigma != b.sigma {
        return Err(Error::invalid("points belong to different ambient spaces"));
    }
    let n = a.coords.len();
    let mut r: f64 = a.coords[..n - 1]
        .iter()
        .zip(&b.coords[..n - 1])
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let dw = a.coords[n - 1] - b.coords[n - 1];
    r += a.sigma * dw * dw;
    if r < 0.0 {
        return Err(Error::invalid(format!("negative squared chord {r:e}: points off the manifold")));
    }
    Ok(r.sqrt())
}

/// Chord between two chart points, computed directly in the chart.
pub fn chord_between(m: &ManifoldSpec, a: &ChartPoint, b: &ChartPoint) -> f64 {
    chord_sq(m.kappa(), &a.to_vec(), &b.to_vec()).max(0.0).sqrt()
}

/// Angular factor `γ_ij`: the cosine of the angle between the directions of
/// the two points as seen from the pole.
pub fn gamma(a: &ChartPoint, b: &ChartPoint) -> f64 {
    match (a.theta, b.theta) {
        (Some(ta), Some(tb)) => {
            a.phi.cos() * b.phi.cos() + a.phi.sin() * b.phi.sin() * (ta - tb).cos()
        }
        _ => (a.phi - b.phi).cos(),
    }
}

/// Geodesic distance from the signature-weighted dot product of the
/// centre-origin embeddings, `csn_κ(d) = κ q_a·q_b`.
///
/// For `κ = 0` the flat Euclidean distance in the same chart is returned.
pub fn geodesic_distance(m: &ManifoldSpec, a: &ChartPoint, b: &ChartPoint) -> Result<f64> {
    let kappa = m.kappa();
    if kappa.is_flat() {
        m.validate_point(a)?;
        m.validate_point(b)?;
        let (x, y) = (chart_to_flat(a), chart_to_flat(b));
        return Ok(x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt());
    }
    let qa = chart_to_extrinsic(m, a, Frame::CenterOrigin)?;
    let qb = chart_to_extrinsic(m, b, Frame::CenterOrigin)?;
    kappa.acsn(kappa.value() * qa.dot(&qb))
}

/// Geodesic distance from the chart identity
/// `κ q_a·q_b = κ sn_a sn_b γ_ab + csn_a csn_b`.
pub fn geodesic_distance_chart(m: &ManifoldSpec, a: &ChartPoint, b: &ChartPoint) -> Result<f64> {
    m.validate_point(a)?;
    m.validate_point(b)?;
    let kappa = m.kappa();
    let g = gamma(a, b);
    if kappa.is_flat() {
        return Ok((a.s * a.s + b.s * b.s - 2.0 * a.s * b.s * g).max(0.0).sqrt());
    }
    let c = kappa.value() * kappa.sn(a.s) * kappa.sn(b.s) * g + kappa.csn(a.s) * kappa.csn(b.s);
    kappa.acsn(c)
}

/// Geodesic distance from the pole of a point at ambient chord `tau`:
/// `s = 2 sn_κ⁻¹(τ/2)`.
pub fn chord_to_geodesic(kappa: Curvature, tau: f64) -> Result<f64> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Domain { function: "chord_to_geodesic", kappa: kappa.value(), value: tau });
    }
    kappa.asn(0.5 * tau).map(|half| 2.0 * half).map_err(|_| Error::Domain {
        function: "chord_to_geodesic",
        kappa: kappa.value(),
        value: tau,
    })
}

/// Ambient chord subtending a geodesic arc of length `s`: `τ = 2 sn_κ(s/2)`.
pub fn geodesic_to_chord(kappa: Curvature, s: f64) -> f64 {
    2.0 * kappa.sn(0.5 * s)
}

fn check_regular(m: &ManifoldSpec, p: &ChartPoint) -> Result<(f64, f64)> {
    let n = m.kappa().sn(p.s);
    if n.abs() < CHART_TOLERANCE {
        return Err(Error::ChartSingularity { what: "sn_kappa(s)", value: n });
    }
    let sin_phi = p.phi.sin();
    if m.dim() == 3 && sin_phi.abs() < CHART_TOLERANCE {
        return Err(Error::ChartSingularity { what: "sin(phi)", value: sin_phi });
    }
    Ok((n, sin_phi))
}

/// Metric tensor and its inverse at a chart point:
/// `diag(1, sn²)` in 2D and `diag(1, sn², sn² sin²φ)` in 3D.
pub fn metric(m: &ManifoldSpec, p: &ChartPoint) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if p.dim() != m.dim() {
        return Err(Error::invalid("chart point dimension does not match manifold"));
    }
    let (n, sin_phi) = check_regular(m, p)?;
    let mut diag = vec![1.0, n * n];
    if m.dim() == 3 {
        diag.push(n * n * sin_phi * sin_phi);
    }
    let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
    let inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        diag.len(),
        diag.iter().map(|d| 1.0 / d),
    ));
    Ok((g, inv))
}

/// Table of connection coefficients `Γ^s_{lj}` (zero-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: [f64; 27],
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Christoffel { dim, data: [0.0; 27] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, s: usize, l: usize, j: usize) -> f64 {
        self.data[9 * s + 3 * l + j]
    }

    #[inline]
    pub fn set(&mut self, s: usize, l: usize, j: usize, v: f64) {
        self.data[9 * s + 3 * l + j] = v;
    }

    /// Sets `Γ^s_{lj}` and `Γ^s_{jl}` together.
    pub fn set_sym(&mut self, s: usize, l: usize, j: usize, v: f64) {
        self.set(s, l, j, v);
        self.set(s, j, l, v);
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    /// All `(s, l, j)` index triples with their values.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize, usize), f64)> + '_ {
        let d = self.dim;
        (0..d).flat_map(move |s| {
            (0..d).flat_map(move |l| (0..d).map(move |j| ((s, l, j), self.get(s, l, j))))
        })
    }

    /// Contracts with a velocity: `Σ_{l,j} Γ^s_{lj} v_l v_j` for every `s`.
    pub fn contract(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|s| {
                let mut acc = 0.0;
                for l in 0..self.dim {
                    for j in 0..self.dim {
                        acc += self.get(s, l, j) * v[l] * v[j];
                    }
                }
                acc
            })
            .collect()
    }

    /// Human-readable name of a symbol, with one-based indices.
    pub fn symbol_name(s: usize, l: usize, j: usize) -> String {
        format!("Gamma^{}_{}{}", s + 1, l + 1, j + 1)
    }
}

/// Closed-form connection coefficients of the geodesic-polar /
/// hyperspherical chart.
pub fn christoffel_closed(m: &ManifoldSpec, p: &ChartPoint) -> Result<Christoffel> {
    if p.dim() != m.dim() {
        return Err(Error::invalid("chart point dimension does not match manifold"));
    }
    let (n, sin_phi) = check_regular(m, p)?;
    let kappa = m.kappa();
    let c = kappa.csn(p.s);
    let ctn = c / n;
    let mut g = Christoffel::zeros(m.dim());
    g.set(0, 1, 1, -n * c);
    g.set_sym(1, 0, 1, ctn);
    if m.dim() == 3 {
        let cos_phi = p.phi.cos();
        g.set(0, 2, 2, -n * c * sin_phi * sin_phi);
        g.set(1, 2, 2, -sin_phi * cos_phi);
        g.set_sym(2, 0, 2, ctn);
        g.set_sym(2, 1, 2, cos_phi / sin_phi);
    }
    Ok(g)
}
