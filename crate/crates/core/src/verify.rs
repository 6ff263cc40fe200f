//! Cross-module invariant suite: every hand-derived formula is compared with
//! an independent computation at randomly sampled points.
//!
//! Sampling is driven by a seeded ChaCha generator so reports are
//! reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{polar_to_cartesian_acceleration, rhs_curved, rhs_flat_polar, rhs_newton_cartesian, SystemState};
use crate::error::Result;
use crate::geometry::{
    chart_to_flat, christoffel_closed, geodesic_distance_chart, ChartPoint, Christoffel, ManifoldSpec,
};
use crate::ktrig::Curvature;
use crate::oracle::{christoffel_numeric, ChartMetric, CotangentField, LagrangeOracle, PotentialField, DEFAULT_STEP};
use crate::potentials::{grad_chart, u_cotangent, u_cotangent_ambient, u_cotangent_geodesic, BodySystem, Potential};

pub const TRIG_TOLERANCE: f64 = 1e-12;
pub const CONTINUITY_TOLERANCE: f64 = 1e-10;
pub const CHRISTOFFEL_TOLERANCE: f64 = 1e-6;
pub const RHS_TOLERANCE: f64 = 1e-6;
pub const FLAT_POLAR_TOLERANCE: f64 = 1e-14;
pub const FLAT_CARTESIAN_TOLERANCE: f64 = 1e-10;
pub const TRI_FORM_TOLERANCE: f64 = 1e-12;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

/// Curvatures used by the Christoffel and vector-field checks.
pub const ORACLE_KAPPAS: [f64; 4] = [1.0, -1.0, 0.1, -0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Enables the metric-inverse assertion inside the Lagrangian oracle.
    pub checked: bool,
    pub trig_samples: usize,
    /// Points per `(dim, κ)` for the Christoffel, vector-field and potential checks.
    pub oracle_samples: usize,
    /// Configurations per `(dim, sign κ)` for the gradient check.
    pub gradient_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 0, checked: false, trig_samples: 10_000, oracle_samples: 100, gradient_samples: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst measured error, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Running worst case with a label for where it occurred.
struct Worst {
    value: f64,
    at: Option<String>,
    samples: usize,
    failure: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, at: None, samples: 0, failure: None }
    }

    fn record(&mut self, value: f64, at: impl FnOnce() -> String) {
        self.samples += 1;
        if value > self.value || value.is_nan() {
            self.value = if value.is_nan() { f64::INFINITY } else { value };
            self.at = Some(at());
        }
    }

    fn fail(&mut self, msg: String) {
        self.samples += 1;
        if self.failure.is_none() {
            self.failure = Some(msg);
        }
    }

    fn finish(self, name: &str, tolerance: f64) -> CheckResult {
        let passed = self.failure.is_none() && self.value <= tolerance;
        CheckResult {
            name: name.to_string(),
            passed,
            worst: self.value,
            tolerance,
            samples: self.samples,
            detail: self.failure.or(self.at),
        }
    }
}

/// `max |a - b| / max |b|`, falling back to absolute when `b` vanishes.
pub fn relative_max_error(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest `|s|` for which the trig identity is held to its tolerance:
/// the whole sphere for `κ > 0`, `√|κ| |s| ≤ 5` for `κ < 0`.
pub fn identity_s_limit(kappa: f64) -> f64 {
    const CAP: f64 = 20.0;
    if kappa > 0.0 {
        (std::f64::consts::PI / kappa.sqrt()).min(CAP)
    } else if kappa < 0.0 {
        (5.0 / (-kappa).sqrt()).min(CAP)
    } else {
        CAP
    }
}

/// `|κ sn² + csn² - 1| ≤ tol (1 + |κ| s²)` at random `(κ, s)`, plus agreement
/// of every κ-trig function at `|κ| = 10⁻¹²` with its `κ = 0` value.
pub fn check_trig_identity(rng: &mut impl Rng, samples: usize) -> Vec<CheckResult> {
    let mut identity = Worst::new();
    for _ in 0..samples {
        let k: f64 = rng.gen_range(-10.0..=10.0);
        let lim = identity_s_limit(k);
        let s: f64 = rng.gen_range(-lim..=lim);
        let kk = match Curvature::new(k) {
            Ok(kk) => kk,
            Err(e) => {
                identity.fail(e.to_string());
                continue;
            }
        };
        let (sn, csn) = (kk.sn(s), kk.csn(s));
        let r = (k * sn * sn + csn * csn - 1.0).abs() / (1.0 + k.abs() * s * s);
        identity.record(r, || format!("kappa = {k}, s = {s}"));
    }

    let mut probe = Worst::new();
    let flat = Curvature::FLAT;
    for &k in &[1e-12, -1e-12] {
        let kk = Curvature::new(k).expect("finite");
        for i in 0..=100 {
            let s = -5.0 + 0.1 * i as f64;
            let mut cmp = |what: &str, a: f64, b: f64| {
                probe.record((a - b).abs() / b.abs().max(1.0), || format!("{what}(s = {s}) at kappa = {k}"));
            };
            cmp("sn", kk.sn(s), flat.sn(s));
            cmp("csn", kk.csn(s), flat.csn(s));
            cmp("d_csn", kk.d_csn(s), flat.d_csn(s));
            cmp("tn", kk.tn(s).unwrap_or(f64::NAN), flat.tn(s).unwrap_or(f64::NAN));
            cmp("asn", kk.asn(s).unwrap_or(f64::NAN), flat.asn(s).unwrap_or(f64::NAN));
            if s.abs() > 0.05 {
                cmp("ctn", kk.ctn(s).unwrap_or(f64::NAN), flat.ctn(s).unwrap_or(f64::NAN));
            }
        }
    }
    vec![identity.finish("trig-identity", TRIG_TOLERANCE), probe.finish("trig-continuity", CONTINUITY_TOLERANCE)]
}

fn regular_s_range(kappa: f64) -> (f64, f64) {
    if kappa > 0.0 {
        (0.2, (std::f64::consts::PI / kappa.sqrt() - 0.2).min(4.0))
    } else if kappa < 0.0 {
        (0.2, (3.0 / (-kappa).sqrt()).min(4.0))
    } else {
        (0.2, 4.0)
    }
}

/// A random point away from the chart singularities.
pub fn random_regular_point(rng: &mut impl Rng, dim: usize, kappa: f64) -> ChartPoint {
    let (lo, hi) = regular_s_range(kappa);
    random_point_in(rng, dim, lo, hi)
}

fn random_point_in(rng: &mut impl Rng, dim: usize, s_lo: f64, s_hi: f64) -> ChartPoint {
    let s = rng.gen_range(s_lo..=s_hi);
    if dim == 2 {
        ChartPoint::planar(s, rng.gen_range(0.0..std::f64::consts::TAU))
    } else {
        let phi = rng.gen_range(0.2..=std::f64::consts::PI - 0.2);
        ChartPoint::spatial(s, phi, rng.gen_range(0.0..std::f64::consts::TAU))
    }
}

/// `n` random points with radii in `[s_lo, s_hi]`, pairwise geodesic distances
/// at least `min_sep`, and for `κ > 0` at least `min_sep` short of antipodal.
pub fn random_configuration(
    rng: &mut impl Rng,
    manifold: &ManifoldSpec,
    n: usize,
    s_lo: f64,
    s_hi: f64,
    min_sep: f64,
) -> Vec<ChartPoint> {
    let k = manifold.kappa().value();
    let antipode = if k > 0.0 { std::f64::consts::PI / k.sqrt() } else { f64::INFINITY };
    loop {
        let pts: Vec<ChartPoint> = (0..n).map(|_| random_point_in(rng, manifold.dim(), s_lo, s_hi)).collect();
        let ok = (0..n).all(|i| {
            (i + 1..n).all(|j| match geodesic_distance_chart(manifold, &pts[i], &pts[j]) {
                Ok(d) => d >= min_sep && d <= antipode - min_sep,
                Err(_) => false,
            })
        });
        if ok {
            return pts;
        }
    }
}

fn random_masses(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.5..=2.0)).collect()
}

/// Closed-form Christoffel symbols against the numeric oracle, for every
/// `(dim, κ)` in `{2, 3} × ORACLE_KAPPAS`.
///
/// `closed` is injectable so that a corrupted table can be shown to fail; the
/// detail names the symbol with the largest discrepancy.
pub fn check_christoffel(
    rng: &mut impl Rng,
    samples: usize,
    closed: &dyn Fn(&ManifoldSpec, &ChartPoint) -> Result<Christoffel>,
) -> CheckResult {
    let mut w = Worst::new();
    for dim in [2, 3] {
        for &k in &ORACLE_KAPPAS {
            let m = ManifoldSpec::new(dim, k).expect("valid manifold");
            let field = ChartMetric::new(m);
            for _ in 0..samples {
                let p = random_regular_point(rng, dim, k);
                let (c, n) = match (closed(&m, &p), christoffel_numeric(&field, &p.to_vec(), DEFAULT_STEP)) {
                    (Ok(c), Ok(n)) => (c, n),
                    (Err(e), _) | (_, Err(e)) => {
                        w.fail(format!("dim {dim}, kappa {k}: {e}"));
                        continue;
                    }
                };
                let scale = c.max_abs().max(n.max_abs());
                let ((s, l, j), diff) = c
                    .entries()
                    .map(|(idx, v)| (idx, (v - n.get(idx.0, idx.1, idx.2)).abs()))
                    .fold(((0, 0, 0), -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
                let rel = if scale > 0.0 { diff / scale } else { diff };
                w.record(rel, || {
                    format!("{} at dim {dim}, kappa {k}, point {:?}", Christoffel::symbol_name(s, l, j), p.to_vec())
                });
            }
        }
    }
    w.finish("christoffel-oracle", CHRISTOFFEL_TOLERANCE)
}

/// Hand-coded equations of motion against the Lagrangian oracle with the
/// cotangent potential, three bodies with random velocities.
pub fn check_rhs_oracle(rng: &mut impl Rng, samples: usize, checked: bool) -> CheckResult {
    let mut w = Worst::new();
    let n = 3;
    for dim in [2, 3] {
        for &k in &ORACLE_KAPPAS {
            let m = ManifoldSpec::new(dim, k).expect("valid manifold");
            let (lo, hi) = regular_s_range(k);
            let metric = ChartMetric::new(m);
            for _ in 0..samples {
                let masses = random_masses(rng, n);
                let pts = random_configuration(rng, &m, n, lo, hi, 0.3);
                let pos: Vec<f64> = pts.iter().flat_map(|p| p.to_vec()).collect();
                let vel: Vec<f64> = (0..pos.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                let potential = CotangentField::new(m, masses.clone());
                let oracle = match LagrangeOracle::uniform(&metric, &potential, masses.clone()) {
                    Ok(o) => o.checked(checked),
                    Err(e) => {
                        w.fail(e.to_string());
                        continue;
                    }
                };
                let state = SystemState::new(0.0, dim, pos.clone(), vel.clone()).expect("sized state");
                let hand = rhs_curved(&state, &masses, m.kappa(), &Potential::Cotangent);
                match (hand, oracle.eom_rhs_general(&pos, &vel)) {
                    (Ok(h), Ok(o)) => {
                        w.record(relative_max_error(&h.accelerations, &o), || {
                            format!("dim {dim}, kappa {k}, positions {pos:?}, velocities {vel:?}")
                        });
                    }
                    (Err(e), _) | (_, Err(e)) => w.fail(format!("dim {dim}, kappa {k}: {e}")),
                }
            }
        }
    }
    w.finish("rhs-oracle", RHS_TOLERANCE)
}

/// `κ = 0` reduction: the curved vector field against the flat polar
/// systems, and those mapped to Cartesian against Newton's equations.
pub fn check_flat_reduction(rng: &mut impl Rng, samples: usize) -> Vec<CheckResult> {
    let mut polar = Worst::new();
    let mut cart = Worst::new();
    let n = 3;
    for dim in [2, 3] {
        let m = ManifoldSpec::new(dim, 0.0).expect("valid manifold");
        for _ in 0..samples {
            let masses = random_masses(rng, n);
            let pts = random_configuration(rng, &m, n, 0.2, 4.0, 0.3);
            let pos: Vec<f64> = pts.iter().flat_map(|p| p.to_vec()).collect();
            let vel: Vec<f64> = (0..pos.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let state = SystemState::new(0.0, dim, pos, vel).expect("sized state");
            let curved = rhs_curved(&state, &masses, Curvature::FLAT, &Potential::Cotangent);
            let flat = rhs_flat_polar(&state, &masses, &Potential::Newton);
            let (c, f) = match (curved, flat) {
                (Ok(c), Ok(f)) => (c, f),
                (Err(e), _) | (_, Err(e)) => {
                    polar.fail(format!("dim {dim}: {e}"));
                    continue;
                }
            };
            polar.record(relative_max_error(&c.accelerations, &f.accelerations), || {
                format!("dim {dim}, positions {:?}", state.positions)
            });
            let x: Vec<f64> = pts.iter().flat_map(chart_to_flat).collect();
            match rhs_newton_cartesian(&x, &masses, dim) {
                Ok(newton) => {
                    let mapped = polar_to_cartesian_acceleration(&state, &f.accelerations);
                    cart.record(relative_max_error(&mapped, &newton), || {
                        format!("dim {dim}, positions {:?}", state.positions)
                    });
                }
                Err(e) => cart.fail(format!("dim {dim}: {e}")),
            }
        }
    }
    vec![
        polar.finish("flat-polar-reduction", FLAT_POLAR_TOLERANCE),
        cart.finish("flat-cartesian-reduction", FLAT_CARTESIAN_TOLERANCE),
    ]
}

/// The chordal, ambient and geodesic forms of the cotangent potential agree.
///
/// Configurations stay within a quarter great circle of the pole on spheres so
/// no pair sits near the zero of `ctn`, where relative error is meaningless.
pub fn check_potential_forms(rng: &mut impl Rng, samples: usize) -> CheckResult {
    let mut w = Worst::new();
    let n = 3;
    for dim in [2, 3] {
        for &k in &ORACLE_KAPPAS {
            let m = ManifoldSpec::new(dim, k).expect("valid manifold");
            let r = 1.0 / k.abs().sqrt();
            for _ in 0..samples {
                let masses = random_masses(rng, n);
                let pts = random_configuration(rng, &m, n, 0.1 * r, 0.7 * r, 0.1 * r);
                let sys = match BodySystem::new(m, masses, &pts) {
                    Ok(s) => s,
                    Err(e) => {
                        w.fail(e.to_string());
                        continue;
                    }
                };
                match (u_cotangent(&sys), u_cotangent_ambient(&sys), u_cotangent_geodesic(&sys)) {
                    (Ok(a), Ok(b), Ok(c)) => {
                        let e = (a - b).abs().max((a - c).abs()) / a.abs();
                        w.record(e, || format!("dim {dim}, kappa {k}: chordal {a}, ambient {b}, geodesic {c}"));
                    }
                    (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => w.fail(format!("dim {dim}, kappa {k}: {e}")),
                }
            }
        }
    }
    w.finish("potential-forms", TRI_FORM_TOLERANCE)
}

/// Analytic chart gradient of the cotangent potential against central
/// differences, for each dimension and each sign of κ.
pub fn check_gradient(rng: &mut impl Rng, samples: usize) -> CheckResult {
    let mut w = Worst::new();
    let n = 3;
    for dim in [2, 3] {
        for sign in [1.0, -1.0] {
            for _ in 0..samples {
                let k = sign * rng.gen_range(0.1..=2.0);
                let m = ManifoldSpec::new(dim, k).expect("valid manifold");
                let (lo, hi) = regular_s_range(k);
                let masses = random_masses(rng, n);
                let pts = random_configuration(rng, &m, n, lo, hi, 0.3);
                let sys = match BodySystem::new(m, masses.clone(), &pts) {
                    Ok(s) => s,
                    Err(e) => {
                        w.fail(e.to_string());
                        continue;
                    }
                };
                let field = CotangentField::new(m, masses);
                match (grad_chart(&sys), field.gradient(sys.coords())) {
                    (Ok(a), Ok(fd)) => w.record(relative_max_error(&a, &fd), || {
                        format!("dim {dim}, kappa {k}, positions {:?}", sys.coords())
                    }),
                    (Err(e), _) | (_, Err(e)) => w.fail(format!("dim {dim}, kappa {k}: {e}")),
                }
            }
        }
    }
    w.finish("gradient-fd", GRADIENT_TOLERANCE)
}

/// Runs every check with the closed-form Christoffel symbols.
pub fn run_suite(cfg: &VerifyConfig) -> VerifyReport {
    let mut rng = rng(cfg.seed);
    let mut checks = check_trig_identity(&mut rng, cfg.trig_samples);
    checks.push(check_christoffel(&mut rng, cfg.oracle_samples, &christoffel_closed));
    checks.push(check_rhs_oracle(&mut rng, cfg.oracle_samples, cfg.checked));
    checks.extend(check_flat_reduction(&mut rng, cfg.oracle_samples));
    checks.push(check_potential_forms(&mut rng, cfg.oracle_samples));
    checks.push(check_gradient(&mut rng, cfg.gradient_samples));
    VerifyReport { seed: cfg.seed, checks }
}
