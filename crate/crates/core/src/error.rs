use thiserror::Error;

use crate::quadrature::QuadratureResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{quantity} overflows at argument {argument} (threshold {threshold})")]
    Range {
        quantity: &'static str,
        argument: f64,
        threshold: f64,
    },

    #[error("partial-wave sum did not converge by l = {max_order} at omega = {omega} (partial sum {partial})")]
    Convergence {
        omega: f64,
        max_order: u32,
        partial: f64,
    },

    #[error("no TM resonance for l = {ell} in [{lower}, {upper}]")]
    ResonanceNotFound { ell: u32, lower: f64, upper: f64 },

    #[error("quadrature stopped short of tolerance: value {}, error estimate {}", .0.value, .0.abs_error_estimate)]
    Quadrature(Box<QuadratureResult>),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of an iterative numerical method, as opposed to bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::Quadrature(_) | Error::ResonanceNotFound { .. }
        )
    }
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
