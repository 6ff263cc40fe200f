//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::{FRAC_PI_4, PI};
use std::process::ExitCode;
use std::time::Instant;

use kappa_nbody::continuation::{
    fit_loglog_slope, potential_convergence, trajectory_convergence, vf_convergence, BaseScenario,
    ChordalState, ComparisonMode, ConvergenceReport, SweepSpec, VelocityConvention,
};
use kappa_nbody::dynamics::{rhs_curved, CurvedSystem, SystemState};
use kappa_nbody::geometry::{christoffel_closed, ChordalPoint, ManifoldSpec};
use kappa_nbody::integrate::{integrate, IntegratorConfig};
use kappa_nbody::oracle::{ChartMetric, CotangentField, LagrangeOracle};
use kappa_nbody::potentials::Potential;
use kappa_nbody::verify::{self, relative_max_error, CheckResult, RHS_TOLERANCE};
use rand::Rng;

const SEED: u64 = 20_240_601;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_checks(checks: &[CheckResult]) -> Outcome {
    let passed = checks.iter().all(|c| c.passed);
    let detail = checks
        .iter()
        .map(|c| {
            let mut s = format!("{}: worst {:.3e} (tol {:.0e}, n = {})", c.name, c.worst, c.tolerance, c.samples);
            if !c.passed {
                if let Some(d) = &c.detail {
                    s.push_str(&format!(" at {d}"));
                }
            }
            s
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { passed, detail }
}

fn decades(lo: i32, hi: i32, sign: f64) -> Vec<f64> {
    (lo..=hi).map(|e| sign * 10f64.powi(-e)).collect()
}

fn both_signs(lo: i32, hi: i32) -> Vec<f64> {
    let mut k = decades(lo, hi, 1.0);
    k.extend(decades(lo, hi, -1.0));
    k
}

fn describe(report: &ConvergenceReport) -> String {
    report
        .sides()
        .map(|s| {
            let slope = s.fit.map(|f| format!("{:.3}", f.slope)).unwrap_or_else(|| "none".into());
            format!("{} slope {slope} monotone {}", if s.sign > 0 { "k>0" } else { "k<0" }, s.monotone)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn c1_trig() -> Outcome {
    from_checks(&verify::check_trig_identity(&mut verify::rng(SEED), 10_000))
}

fn c2_christoffel() -> Outcome {
    from_checks(&[verify::check_christoffel(&mut verify::rng(SEED + 1), 100, &christoffel_closed)])
}

/// The oracle must also reject the φ̈ equation with `θ²` in place of `θ̇²`.
fn c3_rhs() -> Outcome {
    let mut out = from_checks(&[verify::check_rhs_oracle(&mut verify::rng(SEED + 2), 100, true)]);
    let mut rng = verify::rng(SEED + 3);
    let mut misprint_min = f64::INFINITY;
    for &k in &verify::ORACLE_KAPPAS {
        let m = ManifoldSpec::new(3, k).unwrap();
        let metric = ChartMetric::new(m);
        let masses = vec![1.0, 1.5];
        let field = CotangentField::new(m, masses.clone());
        let oracle = LagrangeOracle::uniform(&metric, &field, masses.clone()).unwrap();
        for _ in 0..20 {
            let pts = verify::random_configuration(&mut rng, &m, 2, 0.3, 1.5, 0.3);
            let pos: Vec<f64> = pts.iter().flat_map(|p| p.to_vec()).collect();
            let vel: Vec<f64> = (0..6).map(|_| rng.gen_range(0.3..=1.0)).collect();
            let st = SystemState::new(0.0, 3, pos.clone(), vel.clone()).unwrap();
            let mut acc = rhs_curved(&st, &masses, m.kappa(), &Potential::Cotangent).unwrap().accelerations;
            for r in 0..2 {
                let (phi, theta, td) = (pos[3 * r + 1], pos[3 * r + 2], vel[3 * r + 2]);
                acc[3 * r + 1] += (theta * theta - td * td) * phi.sin() * phi.cos();
            }
            let reference = oracle.eom_rhs_general(&pos, &vel).unwrap();
            misprint_min = misprint_min.min(relative_max_error(&acc, &reference));
        }
    }
    let rejected = misprint_min > RHS_TOLERANCE;
    out.passed &= rejected;
    out.detail.push_str(&format!("; theta^2 variant min error {misprint_min:.3e} (rejected: {rejected})"));
    out
}

fn c4_flat() -> Outcome {
    from_checks(&verify::check_flat_reduction(&mut verify::rng(SEED + 4), 100))
}

fn c5_forms() -> Outcome {
    from_checks(&[verify::check_potential_forms(&mut verify::rng(SEED + 5), 100)])
}

fn three_body_chordal() -> BaseScenario {
    BaseScenario {
        dim: 2,
        masses: vec![1.0, 2.0, 1.5],
        potential: Potential::Cotangent,
        states: vec![ChordalState {
            positions: vec![
                ChordalPoint::planar(0.5, 0.0),
                ChordalPoint::planar(0.8, 2.0),
                ChordalPoint::planar(1.1, 4.0),
            ],
            velocities: vec![0.0; 6],
        }],
    }
}

fn c6_potential() -> Outcome {
    let spec = SweepSpec {
        kappas: both_signs(1, 6),
        base: three_body_chordal(),
        mode: ComparisonMode::ChordFixed,
        velocity: VelocityConvention::ChartFixed,
    };
    let r = potential_convergence(&spec).unwrap();
    let slopes_ok = r.sides().count() == 2
        && r.sides().all(|s| s.fit.is_some_and(|f| (f.slope - 1.0).abs() <= 0.1));
    let u0 = kappa_nbody::potentials::potential_continuity(&spec.base.states[0].positions, &spec.base.masses, &[1e-6])
        .unwrap()
        .rows[0];
    let rel = u0.error / u0.u_flat.abs();
    let passed = slopes_ok && r.failures().count() == 0 && rel <= 1e-5;
    Outcome { passed, detail: format!("{}; |U(1e-6) - U0|/|U0| = {rel:.3e}", describe(&r)) }
}

fn vf_states() -> BaseScenario {
    let mut rng = verify::rng(SEED + 6);
    let mut states = Vec::new();
    for _ in 0..8 {
        let positions = loop {
            let p: Vec<ChordalPoint> =
                (0..3).map(|_| ChordalPoint::planar(rng.gen_range(0.3..=1.2), rng.gen_range(0.0..2.0 * PI))).collect();
            let far = (0..3).all(|i| {
                (i + 1..3).all(|j| {
                    let (a, b) = (&p[i], &p[j]);
                    let dx = a.tau * a.phi.cos() - b.tau * b.phi.cos();
                    let dy = a.tau * a.phi.sin() - b.tau * b.phi.sin();
                    dx.hypot(dy) > 0.3
                })
            });
            if far {
                break p;
            }
        };
        let velocities = (0..6).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        states.push(ChordalState { positions, velocities });
    }
    BaseScenario { dim: 2, masses: vec![1.0, 2.0, 1.5], potential: Potential::Cotangent, states }
}

fn c7_vector_field() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for mode in [ComparisonMode::SameChartTuple, ComparisonMode::ChordFixed] {
        let spec = SweepSpec { kappas: both_signs(1, 6), base: vf_states(), mode, velocity: VelocityConvention::ChartFixed };
        let r = vf_convergence(&spec).unwrap();
        let ok = r.failures().count() == 0
            && r.sides().count() == 2
            && r.sides().all(|s| s.monotone && s.fit.is_some_and(|f| f.slope >= 0.9));
        passed &= ok;
        parts.push(format!("{mode:?}: {}", describe(&r)));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn near_circular_pair() -> BaseScenario {
    // equal masses at unit separation: φ̇ = √2 keeps the Newtonian orbit circular
    BaseScenario {
        dim: 2,
        masses: vec![1.0, 1.0],
        potential: Potential::Cotangent,
        states: vec![ChordalState {
            positions: vec![ChordalPoint::planar(0.5, 0.0), ChordalPoint::planar(0.5, PI)],
            velocities: vec![0.0, 2f64.sqrt(), 0.0, 2f64.sqrt()],
        }],
    }
}

fn c8_trajectory() -> Outcome {
    let spec = SweepSpec {
        kappas: decades(1, 4, 1.0),
        base: near_circular_pair(),
        mode: ComparisonMode::ChordFixed,
        velocity: VelocityConvention::ChartFixed,
    };
    let r = trajectory_convergence(&spec, &IntegratorConfig::rk4(1e-3, 5.0)).unwrap();
    let side = r.positive.as_ref().unwrap();
    let passed = r.failures().count() == 0
        && side.monotone
        && side.fit.is_some_and(|f| (f.slope - 1.0).abs() <= 0.3);
    Outcome { passed, detail: describe(&r) }
}

/// Symmetric eccentric pair; the orbit stays clear of the chart pole.
fn c9_conservation() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for k in [1.0, -1.0] {
        let m = ManifoldSpec::new(2, k).unwrap();
        let sys = CurvedSystem::new(m, vec![1.0, 1.0], Potential::Cotangent).unwrap();
        let st = SystemState::new(0.0, 2, vec![0.5, 0.0, 0.5, PI], vec![0.1, 1.2, 0.1, 1.2]).unwrap();
        let tr = integrate(&sys, 0.0, &st.to_vector(), &IntegratorConfig::rk4(1e-3, 10.0)).unwrap();
        let e0 = sys.energy(&st).unwrap();
        let l0 = sys.angular_momentum(&st);
        let (mut de, mut dl) = (0.0f64, 0.0f64);
        for (t, y) in tr.times.iter().zip(&tr.states) {
            let s = SystemState::from_vector(*t, 2, y);
            de = de.max(((sys.energy(&s).unwrap() - e0) / e0).abs());
            dl = dl.max(((sys.angular_momentum(&s) - l0) / l0).abs());
        }
        let ok = tr.completed() && de <= 1e-8 && dl <= 1e-8;
        passed &= ok;
        parts.push(format!("kappa {k}: |dE/E0| {de:.3e}, |dL/L0| {dl:.3e}"));
    }
    Outcome { passed, detail: parts.join("; ") }
}

/// Unit-speed great circle on the unit sphere from `(s0, 0)` with `ṡ = 0`.
fn great_circle(s0: f64, t: f64) -> [f64; 4] {
    let (ss, cs) = s0.sin_cos();
    let (st, ct) = t.sin_cos();
    let s = (cs * ct).acos();
    let phi = st.atan2(ss * ct);
    let sd = cs * st / (1.0 - cs * cs * ct * ct).sqrt();
    let pd = ss / (ss * ss * ct * ct + st * st);
    [s, phi, sd, pd]
}

fn c10_order() -> Outcome {
    let s0 = FRAC_PI_4;
    let t_end = 2.0;
    let m = ManifoldSpec::new(2, 1.0).unwrap();
    let sys = CurvedSystem::new(m, vec![1.0], Potential::None).unwrap();
    let y0 = great_circle(s0, 0.0);
    let exact = great_circle(s0, t_end);
    let dts = [0.2, 0.1, 0.05, 0.025];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let tr = integrate(&sys, 0.0, &y0, &IntegratorConfig::rk4(dt, t_end)).unwrap();
            let (_, y) = tr.last();
            y.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    let fit = fit_loglog_slope(&dts, &errs);
    let passed = fit.is_some_and(|f| (f.slope - 4.0).abs() <= 0.2);
    let slope = fit.map(|f| format!("{:.3}", f.slope)).unwrap_or_else(|| "none".into());
    Outcome { passed, detail: format!(
            "order {slope}, errors [{}]",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
        ) }
}

fn c11_gradient() -> Outcome {
    from_checks(&[verify::check_gradient(&mut verify::rng(SEED + 7), 50)])
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("unified trig identities and continuity", c1_trig),
        ("Christoffel closed forms vs numeric oracle", c2_christoffel),
        ("hand-coded vector field vs Lagrangian oracle", c3_rhs),
        ("kappa = 0 reduction to flat and Cartesian Newton", c4_flat),
        ("potential chordal/ambient/geodesic agreement", c5_forms),
        ("potential convergence U_k -> U_0", c6_potential),
        ("vector-field convergence, both comparison modes", c7_vector_field),
        ("trajectory convergence", c8_trajectory),
        ("energy and angular momentum conservation", c9_conservation),
        ("RK4 global order on the great circle", c10_order),
        ("analytic gradient vs finite differences", c11_gradient),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "[{}] criterion {:>2}: {name} ({:.2}s) {}",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
