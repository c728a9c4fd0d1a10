use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("steady-state thermal system is singular")]
    SingularThermalSystem,
    #[error("linearization supports one lumped delayed-neutron group, got {0}")]
    UnsupportedGroupCount(usize),
    #[error("state matrix is singular")]
    SingularA,
    #[error("integration step {dt} s exceeds the {max} s bound")]
    StepSizeTooLarge { dt: f64, max: f64 },
    #[error("state became non-finite at t = {time} s")]
    NonFiniteState { time: f64 },
    #[error("differintegration order {0} out of range")]
    OrderOutOfRange(f64),
    #[error("invalid fit band [{low}, {high}] rad/s")]
    BadBand { low: f64, high: f64 },
    #[error("controller state does not match configuration: {0}")]
    ConfigMismatch(String),
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("series too short: need {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("simulation diverged at t = {time} s")]
    DivergedSimulation { time: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
