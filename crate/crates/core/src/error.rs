use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular geometry: {0}")]
    Singular(String),
    #[error("degenerate orbit: {0}")]
    DegenerateOrbit(String),
    #[error("camera geometry error: {0}")]
    Geometry(String),
    #[error("infeasible limb geometry: {0}")]
    InfeasibleGeometry(String),
    #[error("degenerate limb: {0}")]
    DegenerateLimb(String),
    #[error("propagation failed at t = {t}: {reason}")]
    Propagation { t: f64, reason: String },
    #[error("filter error: {0}")]
    Filter(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
