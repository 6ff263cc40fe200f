//! Explicit Runge–Kutta integration with singularity events.
//!
//! Every candidate step is checked before it is accepted: a failed vector
//! field evaluation inside the step, or a candidate state rejected by
//! [`OdeSystem::admissible`], ends the run with the last good state and a
//! [`Termination::SingularityEvent`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn derivative(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Whether `y` may be accepted as a step result.
    fn admissible(&self, _y: &[f64]) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// Classic fourth-order Runge–Kutta with fixed step.
    Rk4 { dt: f64 },
    /// Dormand–Prince 5(4) with local error control.
    Rk45Adaptive {
        tol_abs: f64,
        tol_rel: f64,
        dt_min: f64,
        dt_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(flatten)]
    pub method: Method,
    pub t_end: f64,
    /// Record every `sample_stride`-th accepted step (the final state is always recorded).
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
}

fn default_stride() -> usize {
    1
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        IntegratorConfig { method: Method::Rk4 { dt }, t_end, sample_stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.t_end) {
            return Err(Error::invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.sample_stride == 0 {
            return Err(Error::invalid("sample_stride must be at least 1"));
        }
        match self.method {
            Method::Rk4 { dt } if !positive(dt) => {
                Err(Error::invalid(format!("dt must be positive, got {dt}")))
            }
            Method::Rk45Adaptive { tol_abs, tol_rel, dt_min, dt_max } => {
                if !(positive(tol_abs) && positive(tol_rel)) {
                    Err(Error::invalid("tolerances must be positive"))
                } else if !(positive(dt_min) && positive(dt_max) && dt_min <= dt_max) {
                    Err(Error::invalid("need 0 < dt_min <= dt_max"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    SingularityEvent { t: f64, message: String },
    StepUnderflow { t: f64, dt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> (&f64, &Vec<f64>) {
        (self.times.last().expect("non-empty"), self.states.last().expect("non-empty"))
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }
}

struct Recorder {
    stride: usize,
    accepted: usize,
    traj: Trajectory,
}

impl Recorder {
    fn push(&mut self, t: f64, y: &[f64], last: bool) {
        self.accepted += 1;
        if last || self.accepted.is_multiple_of(self.stride) {
            self.traj.times.push(t);
            self.traj.states.push(y.to_vec());
        }
    }

    fn finish(mut self, t: f64, y: &[f64], termination: Termination) -> Trajectory {
        if self.traj.times.last() != Some(&t) {
            self.traj.times.push(t);
            self.traj.states.push(y.to_vec());
        }
        self.traj.termination = termination;
        self.traj
    }
}

/// Integrates from `(t0, y0)` to `t0 + cfg.t_end`.
pub fn integrate<S: OdeSystem + ?Sized>(sys: &S, t0: f64, y0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    sys.admissible(y0)?;
    let mut scratch = vec![0.0; y0.len()];
    sys.derivative(t0, y0, &mut scratch)?;

    let rec = Recorder {
        stride: cfg.sample_stride,
        accepted: 0,
        traj: Trajectory {
            times: vec![t0],
            states: vec![y0.to_vec()],
            termination: Termination::Completed,
        },
    };
    match cfg.method {
        Method::Rk4 { dt } => Ok(run_rk4(sys, t0, y0, dt, cfg.t_end, rec)),
        Method::Rk45Adaptive { tol_abs, tol_rel, dt_min, dt_max } => {
            Ok(run_dopri(sys, t0, y0, cfg.t_end, tol_abs, tol_rel, dt_min, dt_max, rec))
        }
    }
}

/// `out = y + h Σ c_i k_i`
fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o = y[i] + h * acc;
    }
}

fn event(t: f64, e: Error) -> Termination {
    Termination::SingularityEvent { t, message: e.to_string() }
}

fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
    let n = y.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    sys.derivative(t, y, &mut k1)?;
    axpy(&mut tmp, y, 0.5 * h, &[(1.0, &k1)]);
    sys.derivative(t + 0.5 * h, &tmp, &mut k2)?;
    axpy(&mut tmp, y, 0.5 * h, &[(1.0, &k2)]);
    sys.derivative(t + 0.5 * h, &tmp, &mut k3)?;
    axpy(&mut tmp, y, h, &[(1.0, &k3)]);
    sys.derivative(t + h, &tmp, &mut k4)?;
    axpy(out, y, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)]);
    Ok(())
}

fn run_rk4<S: OdeSystem + ?Sized>(sys: &S, t0: f64, y0: &[f64], dt: f64, span: f64, mut rec: Recorder) -> Trajectory {
    // equal steps that land exactly on the end time
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut y = y0.to_vec();
    let mut next = vec![0.0; y.len()];
    let mut t = t0;
    for k in 1..=steps {
        let t_next = t0 + k as f64 * h;
        if let Err(e) = rk4_step(sys, t, &y, h, &mut next).and_then(|_| sys.admissible(&next)) {
            return rec.finish(t, &y, event(t, e));
        }
        std::mem::swap(&mut y, &mut next);
        t = t_next;
        rec.push(t, &y, k == steps);
    }
    rec.finish(t, &y, Termination::Completed)
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; writes the fifth-order solution and returns the
/// scaled RMS error estimate.
fn dopri_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
    tol_abs: f64,
    tol_rel: f64,
    out: &mut [f64],
) -> Result<f64> {
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    sys.derivative(t, y, &mut k[0])?;
    for stage in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(stage) {
                acc += A[stage][j] * kj[i];
            }
            tmp[i] = y[i] + h * acc;
        }
        sys.derivative(t + C[stage] * h, &tmp, &mut k[stage])?;
    }
    let mut err_sq = 0.0;
    for i in 0..n {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for s in 0..7 {
            hi += B5[s] * k[s][i];
            lo += B4[s] * k[s][i];
        }
        out[i] = y[i] + h * hi;
        let scale = tol_abs + tol_rel * y[i].abs().max(out[i].abs());
        let e = h * (hi - lo) / scale;
        err_sq += e * e;
    }
    Ok((err_sq / n as f64).sqrt())
}

#[allow(clippy::too_many_arguments)]
fn run_dopri<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    span: f64,
    tol_abs: f64,
    tol_rel: f64,
    dt_min: f64,
    dt_max: f64,
    mut rec: Recorder,
) -> Trajectory {
    let t_end = t0 + span;
    let mut y = y0.to_vec();
    let mut next = vec![0.0; y.len()];
    let mut t = t0;
    let mut h = (span / 100.0).clamp(dt_min, dt_max);
    loop {
        let remaining = t_end - t;
        if remaining <= 1e-14 * span.max(1.0) {
            return rec.finish(t, &y, Termination::Completed);
        }
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let err = match dopri_step(sys, t, &y, step, tol_abs, tol_rel, &mut next) {
            Ok(e) => e,
            Err(e) => return rec.finish(t, &y, event(t, e)),
        };
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            if let Err(e) = sys.admissible(&next) {
                return rec.finish(t, &y, event(t, e));
            }
            std::mem::swap(&mut y, &mut next);
            t = if last { t_end } else { t + step };
            rec.push(t, &y, last);
            h = (step * factor).min(dt_max);
        } else {
            h = step * factor;
            if h < dt_min {
                return rec.finish(t, &y, Termination::StepUnderflow { t, dt: h });
            }
        }
        h = h.max(dt_min).min(dt_max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Harmonic oscillator `x'' = -x`.
    struct Oscillator;

    impl OdeSystem for Oscillator {
        fn derivative(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
    }

    /// Free particle that becomes inadmissible past `x = 1`.
    struct Wall;

    impl OdeSystem for Wall {
        fn derivative(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[1];
            dy[1] = 0.0;
            Ok(())
        }

        fn admissible(&self, y: &[f64]) -> Result<()> {
            if y[0] > 1.0 {
                Err(Error::ChartSingularity { what: "x", value: y[0] })
            } else {
                Ok(())
            }
        }
    }

    /// `y' = y²` blows up at `t = 1` from `y(0) = 1`.
    struct BlowUp;

    impl OdeSystem for BlowUp {
        fn derivative(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[0] * y[0];
            Ok(())
        }
    }

    #[test]
    fn rk4_lands_on_end_time_with_stride() {
        let cfg = IntegratorConfig::rk4(0.03, 1.0).with_stride(10);
        let tr = integrate(&Oscillator, 0.0, &[1.0, 0.0], &cfg).unwrap();
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        // 34 steps: initial + steps 10, 20, 30 + final
        assert_eq!(tr.times.len(), 5);
        assert_relative_eq!(tr.states.last().unwrap()[0], 1f64.cos(), epsilon = 1e-7);
    }

    #[test]
    fn dopri_meets_tolerance() {
        let cfg = IntegratorConfig {
            method: Method::Rk45Adaptive { tol_abs: 1e-10, tol_rel: 1e-10, dt_min: 1e-8, dt_max: 0.5 },
            t_end: 10.0,
            sample_stride: 1,
        };
        let tr = integrate(&Oscillator, 0.0, &[1.0, 0.0], &cfg).unwrap();
        assert!(tr.completed());
        let (t, y) = tr.last();
        assert_eq!(*t, 10.0);
        assert_relative_eq!(y[0], 10f64.cos(), epsilon = 1e-8);
        assert_relative_eq!(y[1], -10f64.sin(), epsilon = 1e-8);
    }

    #[test]
    fn event_rejects_step_and_keeps_last_good_state() {
        let cfg = IntegratorConfig::rk4(0.1, 5.0);
        let tr = integrate(&Wall, 0.0, &[0.0, 1.0], &cfg).unwrap();
        assert!(matches!(tr.termination, Termination::SingularityEvent { .. }));
        let (t, y) = tr.last();
        assert!(y[0] <= 1.0);
        assert_relative_eq!(*t, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_underflow_is_reported() {
        let cfg = IntegratorConfig {
            method: Method::Rk45Adaptive { tol_abs: 1e-12, tol_rel: 1e-12, dt_min: 1e-6, dt_max: 0.1 },
            t_end: 2.0,
            sample_stride: 1,
        };
        let tr = integrate(&BlowUp, 0.0, &[1.0], &cfg).unwrap();
        assert!(matches!(tr.termination, Termination::StepUnderflow { .. }), "{:?}", tr.termination);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::rk4(0.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::rk4(0.1, -1.0).validate().is_err());
        assert!(IntegratorConfig::rk4(0.1, 1.0).with_stride(0).validate().is_err());
        let bad = IntegratorConfig {
            method: Method::Rk45Adaptive { tol_abs: 1e-8, tol_rel: 0.0, dt_min: 1e-6, dt_max: 0.1 },
            t_end: 1.0,
            sample_stride: 1,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn inadmissible_initial_state_is_an_error() {
        assert!(integrate(&Wall, 0.0, &[2.0, 0.0], &IntegratorConfig::rk4(0.1, 1.0)).is_err());
    }

    #[test]
    fn runs_are_bit_identical() {
        let cfg = IntegratorConfig::rk4(0.01, 3.0);
        let a = integrate(&Oscillator, 0.0, &[1.0, 0.2], &cfg).unwrap();
        let b = integrate(&Oscillator, 0.0, &[1.0, 0.2], &cfg).unwrap();
        assert_eq!(a, b);
    }
}
