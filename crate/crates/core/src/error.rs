use thiserror::Error;

use crate::matching::MatchResult;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("degenerate landmark configuration: {0}")]
    DegenerateConfig(String),

    #[error("not a diffeomorphism: {0}")]
    NotDiffeo(String),

    #[error("outside the chart gamma > -2: {0}")]
    OutOfChart(String),

    #[error("Sobolev order {order} is below the required minimum {min}")]
    OrderTooLow { order: f64, min: f64 },

    /// The iteration stopped before meeting its tolerance. Solvers that have a
    /// usable best iterate attach it.
    #[error("did not converge: {reason}")]
    NotConverged {
        reason: String,
        best: Option<Box<MatchResult>>,
    },

    #[error("blow-up detected: {0}")]
    BlowUp(String),

    #[error("finite-difference estimate is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable code, used in structured output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegenerateConfig(_) => "degenerate_config",
            Error::NotDiffeo(_) => "not_diffeo",
            Error::OutOfChart(_) => "out_of_chart",
            Error::OrderTooLow { .. } => "order_too_low",
            Error::NotConverged { .. } => "not_converged",
            Error::BlowUp(_) => "blow_up",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::InvalidInput(_) => "invalid_input",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn codes_are_distinct() {
        let all = [
            Error::DegenerateConfig(String::new()),
            Error::NotDiffeo(String::new()),
            Error::OutOfChart(String::new()),
            Error::OrderTooLow { order: 0.0, min: 1.0 },
            Error::NotConverged { reason: String::new(), best: None },
            Error::BlowUp(String::new()),
            Error::IllConditioned(String::new()),
            Error::InvalidInput(String::new()),
        ];
        let codes: HashSet<_> = all.iter().map(Error::code).collect();
        assert_eq!(codes.len(), all.len());
    }
}
