use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A transfer function was evaluated at (or numerically at) one of its poles.
    #[error("transfer function pole at lambda = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    /// The lifetime formula is singular at unit gain.
    #[error("lifetime formula is singular at |H| = 1; pass the unity flag to get N * t0")]
    UnitGain,

    /// The requested time lies at or beyond the finite blow-up horizon.
    #[error("time {t} is at or beyond the maneuver blow-up horizon {horizon}")]
    Horizon { t: f64, horizon: f64 },

    /// Conjunction geometry cannot be built (e.g. parallel velocities).
    #[error("degenerate conjunction geometry: {0}")]
    DegenerateGeometry(String),

    /// Malformed or physically implausible input data.
    #[error("data error: {0}")]
    Data(String),

    /// Adaptive quadrature ran out of budget before meeting its tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, error {achieved_error:e}, requested {requested:e}")]
    Quadrature {
        estimate: f64,
        achieved_error: f64,
        requested: f64,
    },

    /// State became non-finite during integration.
    #[error("numerical blow-up at t = {time_s} s")]
    BlowUp { time_s: f64 },

    /// Policy inference could not identify the parameters.
    #[error("policy inference failed: {0}")]
    Inference(String),

    /// TLE parse failures, with enough detail to locate the problem.
    #[error(transparent)]
    Tle(#[from] crate::ingest::tle::TleError),

    /// Row-level failures while reading CSV input.
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let row = e
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        Error::Row {
            row,
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
