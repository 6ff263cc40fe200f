//! Unified circular/hyperbolic trigonometry.
//!
//! For a signed curvature `κ` the κ-sine and κ-cosine are
//!
//! ```text
//!            | κ^{-1/2} sin(κ^{1/2} s)      κ > 0          | cos(κ^{1/2} s)     κ > 0
//! sn_κ(s) =  | s                            κ = 0  csn_κ = | 1                  κ = 0
//!            | |κ|^{-1/2} sinh(|κ|^{1/2} s) κ < 0          | cosh(|κ|^{1/2} s)  κ < 0
//! ```
//!
//! with `tn = sn / csn` and `ctn = csn / sn`. Near `κ s² = 0` both are evaluated
//! from their Taylor series in `κ s²`, so every function here is continuous
//! (and accurate) jointly in `(κ, s)` through the flat case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `|κ| s²` the series branch is used.
pub const SERIES_THRESHOLD: f64 = 1e-6;

/// Inputs to the inverse κ-cosine this far outside its range are clamped.
pub const INVERSE_CLAMP: f64 = 1e-12;

/// Signed Gaussian curvature.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Curvature(f64);

impl Curvature {
    pub const FLAT: Curvature = Curvature(0.0);

    pub fn new(kappa: f64) -> Result<Self> {
        if kappa.is_finite() {
            Ok(Curvature(kappa))
        } else {
            Err(Error::invalid(format!("curvature must be finite, got {kappa}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Metric signature of the ambient space: `+1` (Euclidean) for `κ ≥ 0`,
    /// `-1` (Minkowski) for `κ < 0`.
    #[inline]
    pub fn sigma(self) -> f64 {
        if self.0 < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    #[inline]
    pub fn is_flat(self) -> bool {
        self.0 == 0.0
    }

    /// κ-sine.
    pub fn sn(self, s: f64) -> f64 {
        let k = self.0;
        let u = k * s * s;
        if u.abs() < SERIES_THRESHOLD {
            // s (1 - u/3! + u²/5! - u³/7! + u⁴/9!)
            s * (1.0 + u * (-1.0 / 6.0 + u * (1.0 / 120.0 + u * (-1.0 / 5040.0 + u / 362_880.0))))
        } else if k > 0.0 {
            let r = k.sqrt();
            (r * s).sin() / r
        } else {
            let r = (-k).sqrt();
            (r * s).sinh() / r
        }
    }

    /// κ-cosine.
    pub fn csn(self, s: f64) -> f64 {
        let k = self.0;
        let u = k * s * s;
        if u.abs() < SERIES_THRESHOLD {
            1.0 + u * (-0.5 + u * (1.0 / 24.0 + u * (-1.0 / 720.0 + u / 40_320.0)))
        } else if k > 0.0 {
            (k.sqrt() * s).cos()
        } else {
            ((-k).sqrt() * s).cosh()
        }
    }

    /// κ-tangent. Fails at zeros of `csn`.
    pub fn tn(self, s: f64) -> Result<f64> {
        let c = self.csn(s);
        if c == 0.0 {
            return Err(Error::Pole { function: "tn", s });
        }
        Ok(self.sn(s) / c)
    }

    /// κ-cotangent. Fails at zeros of `sn`.
    pub fn ctn(self, s: f64) -> Result<f64> {
        let n = self.sn(s);
        if n == 0.0 {
            return Err(Error::Pole { function: "ctn", s });
        }
        Ok(self.csn(s) / n)
    }

    /// `d/ds sn_κ(s) = csn_κ(s)`.
    #[inline]
    pub fn d_sn(self, s: f64) -> f64 {
        self.csn(s)
    }

    /// `d/ds csn_κ(s) = -κ sn_κ(s)`.
    #[inline]
    pub fn d_csn(self, s: f64) -> f64 {
        -self.0 * self.sn(s)
    }

    /// Principal inverse of `sn_κ`.
    ///
    /// For `κ > 0` the result lies in `[-π/(2√κ), π/(2√κ)]` and the argument
    /// must satisfy `|x| ≤ κ^{-1/2}`.
    pub fn asn(self, x: f64) -> Result<f64> {
        let k = self.0;
        let u = k * x * x;
        if u.abs() < SERIES_THRESHOLD {
            // asin/asinh series written in the signed variable u = κ x²
            return Ok(x * (1.0
                + u * (1.0 / 6.0 + u * (3.0 / 40.0 + u * (5.0 / 112.0 + u * 35.0 / 1152.0)))));
        }
        if k > 0.0 {
            let r = k.sqrt();
            let y = r * x;
            if y.abs() > 1.0 + 4.0 * f64::EPSILON {
                return Err(Error::Domain { function: "asn", kappa: k, value: x });
            }
            Ok(y.clamp(-1.0, 1.0).asin() / r)
        } else {
            let r = (-k).sqrt();
            Ok((r * x).asinh() / r)
        }
    }

    /// Principal inverse of `csn_κ`, returning `s ≥ 0`.
    ///
    /// Undefined for `κ = 0`. Arguments within [`INVERSE_CLAMP`] outside the
    /// range of `csn_κ` are clamped onto it.
    pub fn acsn(self, c: f64) -> Result<f64> {
        let k = self.0;
        let domain = || Error::Domain { function: "acsn", kappa: k, value: c };
        if k > 0.0 {
            if c.abs() > 1.0 + INVERSE_CLAMP {
                return Err(domain());
            }
            Ok(c.clamp(-1.0, 1.0).acos() / k.sqrt())
        } else if k < 0.0 {
            if c < 1.0 - INVERSE_CLAMP {
                return Err(domain());
            }
            Ok(c.max(1.0).acosh() / (-k).sqrt())
        } else {
            Err(domain())
        }
    }
}

impl From<Curvature> for f64 {
    fn from(k: Curvature) -> f64 {
        k.0
    }
}

impl std::fmt::Display for Curvature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn k(v: f64) -> Curvature {
        Curvature::new(v).unwrap()
    }

    /// Power series for sinh, summed to convergence.
    fn sinh_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 1.0;
        while term.abs() > 1e-18 * sum.abs() {
            term *= x * x / ((n + 1.0) * (n + 2.0));
            sum += term;
            n += 2.0;
        }
        sum
    }

    #[test]
    fn sn_examples() {
        assert_relative_eq!(k(1.0).sn(FRAC_PI_2), 1.0, epsilon = 1e-15);
        assert_eq!(k(0.0).sn(2.5), 2.5);
        let expected = sinh_series(1.0);
        assert_relative_eq!(expected, 1.175_201_193_643_801_4, epsilon = 1e-15);
        assert_relative_eq!(k(-1.0).sn(1.0), expected, max_relative = 1e-15);
    }

    #[test]
    fn csn_tn_ctn_examples() {
        assert!(k(4.0).csn(FRAC_PI_4).abs() < 1e-15);
        assert_relative_eq!(k(1.0).ctn(FRAC_PI_4).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(k(0.0).ctn(2.0).unwrap(), 0.5);
        assert_relative_eq!(k(1.0).tn(FRAC_PI_4).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(k(-1.0).tn(1.0).unwrap(), 1f64.tanh(), max_relative = 1e-15);
    }

    #[test]
    fn ctn_pole_reports_argument() {
        match k(1.0).ctn(0.0) {
            Err(Error::Pole { function, s }) => {
                assert_eq!(function, "ctn");
                assert_eq!(s, 0.0);
            }
            other => panic!("expected pole, got {other:?}"),
        }
        assert!(k(0.0).ctn(0.0).is_err());
        assert!(k(-2.0).ctn(0.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(k(1.0).d_sn(0.0), 1.0);
        assert_eq!(k(0.0).d_csn(7.0), 0.0);
        let h = 1e-6;
        let kk = k(-1.0);
        let fd = (kk.csn(1.0 + h) - kk.csn(1.0 - h)) / (2.0 * h);
        assert_relative_eq!(fd, sinh_series(1.0), max_relative = 1e-8);
        assert_relative_eq!(kk.d_csn(1.0), fd, max_relative = 1e-8);
    }

    #[test]
    fn asn_examples() {
        assert_relative_eq!(k(1.0).asn(1.0).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(k(0.0).asn(3.7).unwrap(), 3.7);
        let x = k(-1.0).sn(2.0);
        assert_relative_eq!(k(-1.0).asn(x).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn asn_domain_error() {
        assert!(matches!(
            k(1.0).asn(1.5),
            Err(Error::Domain { function: "asn", .. })
        ));
        assert!(k(4.0).asn(0.6).is_err());
        assert!(k(-4.0).asn(100.0).is_ok());
    }

    #[test]
    fn acsn_inverts_csn() {
        assert_relative_eq!(k(1.0).acsn(0.0).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(k(1.0).acsn(-1.0).unwrap(), PI, epsilon = 1e-15);
        assert_relative_eq!(k(-0.5).acsn(k(-0.5).csn(1.3)).unwrap(), 1.3, max_relative = 1e-13);
        assert_eq!(k(1.0).acsn(1.0 + 1e-13).unwrap(), 0.0);
        assert!(k(1.0).acsn(1.0 + 1e-9).is_err());
        assert!(k(-1.0).acsn(0.5).is_err());
        assert!(k(0.0).acsn(1.0).is_err());
    }

    #[test]
    fn series_branch_is_continuous_with_closed_form() {
        // Just inside |κ| s² = 1e-6 the series must match the closed form.
        for &kv in &[1.0, -1.0, 3.0, -0.2] {
            let kk = k(kv);
            let r = kv.abs().sqrt();
            let s = (SERIES_THRESHOLD / kv.abs()).sqrt() * (1.0 - 1e-9);
            let (sn, csn) = if kv > 0.0 {
                ((r * s).sin() / r, (r * s).cos())
            } else {
                ((r * s).sinh() / r, (r * s).cosh())
            };
            assert_relative_eq!(kk.sn(s), sn, max_relative = 1e-14);
            assert_relative_eq!(kk.csn(s), csn, max_relative = 1e-15);
            let x = kk.sn(s * (1.0 + 2e-9));
            assert_relative_eq!(kk.asn(x).unwrap(), s * (1.0 + 2e-9), max_relative = 1e-12);
        }
    }

    #[test]
    fn non_finite_curvature_rejected() {
        assert!(Curvature::new(f64::NAN).is_err());
        assert!(Curvature::new(f64::INFINITY).is_err());
    }

    #[test]
    fn sigma_convention() {
        assert_eq!(k(2.0).sigma(), 1.0);
        assert_eq!(k(0.0).sigma(), 1.0);
        assert_eq!(k(-2.0).sigma(), -1.0);
    }
}
