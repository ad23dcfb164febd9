use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(ValidationReport),

    #[error("invalid input `{name}` = {value}: {reason}")]
    InvalidInput {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A log argument or similar quantity left the regime where the closed
    /// form is defined.
    #[error("domain error in {what}: argument {value} is not positive")]
    Domain { what: &'static str, value: f64 },

    #[error("{what}: x = {x} lies outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        x: f64,
        lo: f64,
        hi: f64,
    },

    #[error("singular {what} system (determinant {det:e})")]
    Singular { what: &'static str, det: f64 },

    #[error("grid too coarse: cell Peclet number {peclet:.3} at y = {y:.6} exceeds 2")]
    GridTooCoarse { peclet: f64, y: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("instability: value {value:e} at t = {t}, y = {y} left [-1e-6, 1+1e-6]")]
    Unstable { value: f64, t: f64, y: f64 },

    #[error("no bracket: ruin probability {psi:e} at b_max = {b_max} still exceeds {target:e}")]
    NoBracket { b_max: f64, psi: f64, target: f64 },

    #[error("tolerance not met after {iterations} iterations: best b = {best}, residual {residual:e}")]
    ToleranceNotMet {
        best: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("risk level {epsilon} is not attainable on (0, {b}]: ruin probability ranges over [{psi_lo:e}, {psi_hi:e}]")]
    Unsolvable {
        epsilon: f64,
        b: f64,
        psi_lo: f64,
        psi_hi: f64,
    },

    #[error("value ratio undefined at x = 0")]
    UndefinedAtZero,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
