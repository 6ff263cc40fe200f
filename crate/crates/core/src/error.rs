use thiserror::Error;

use crate::potentials::SingularityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `tn` or `ctn` evaluated where its denominator vanishes.
    #[error("{function} has a pole at s = {s}")]
    Pole { function: &'static str, s: f64 },

    /// Argument outside the domain of an inverse trigonometric function.
    #[error("{function}: argument {value} outside domain (kappa = {kappa})")]
    Domain {
        function: &'static str,
        kappa: f64,
        value: f64,
    },

    /// Degenerate geodesic-polar or hyperspherical chart.
    #[error("chart singularity: {what} = {value:e}")]
    ChartSingularity { what: &'static str, value: f64 },

    /// Configuration lies in the singular set of the potential.
    #[error("singular configuration: {}", format_reports(.0))]
    Singular(Vec<SingularityReport>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("metric is not invertible at the evaluation point")]
    MetricNotInvertible,

    #[error("metric asymmetry {0:e} exceeds tolerance")]
    MetricAsymmetric(f64),

    #[error("kronecker contraction residual {0:e} exceeds tolerance")]
    KroneckerResidual(f64),

    #[error("at least {needed} samples required, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}

fn format_reports(reports: &[SingularityReport]) -> String {
    reports
        .iter()
        .map(|r| format!("{} between bodies {} and {} (q = {:e})", r.kind, r.i, r.j, r.value))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors that signal a runtime singularity (chart or physical)
    /// rather than malformed input.
    pub fn is_singularity(&self) -> bool {
        matches!(
            self,
            Error::Pole { .. } | Error::ChartSingularity { .. } | Error::Singular(_)
        )
    }
}
