use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rod parameters: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rotation angle {angle} rad is too close to pi for the principal logarithm")]
    RotationNearPi { angle: f64 },

    #[error("W(r) is near singular at |r| = {norm}")]
    NearSingular { norm: f64 },

    #[error("arc length {x} m is outside [0, {length}] m")]
    OutOfRange { x: f64, length: f64 },

    #[error("stacked jacobian is singular (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },

    #[error("P*Bbar is rank deficient (sigma_3/sigma_1 = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("inverse kinematics did not converge after {iterations} iterations (error {error:e})")]
    NotConverged { iterations: usize, error: f64 },

    #[error("numerical checks failed: {0}")]
    CheckFailed(String),

    #[error("at t = {time} s: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_time(self, time: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                time,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, looking through time stamps.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }

    /// Short machine-readable code used by the command line front end.
    pub fn code(&self) -> &'static str {
        match self.root() {
            Error::InvalidSpec(_) | Error::InvalidInput(_) | Error::Config(_) => "config",
            Error::RotationNearPi { .. } => "rotation-near-pi",
            Error::NearSingular { .. } => "near-singular",
            Error::OutOfRange { .. } => "out-of-range",
            Error::SingularJacobian { .. } => "singular-jacobian",
            Error::RankDeficient { .. } => "rank-deficient",
            Error::NotConverged { .. } => "not-converged",
            Error::CheckFailed(_) => "check-failed",
            Error::Io(_) | Error::Csv(_) => "io",
            Error::AtTime { .. } => unreachable!(),
        }
    }
}
