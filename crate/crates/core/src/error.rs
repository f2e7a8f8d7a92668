use thiserror::Error;

/// Errors raised by the model, bound and certification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Bloch vector ({nx}, {ny}, {nz}) has norm {norm} > 1")]
    BlochOutsideBall { nx: f64, ny: f64, nz: f64, norm: f64 },

    #[error("POVM parameters a = {a}, b = {b} violate |a| + b <= 1, 0 <= b <= 1")]
    InvalidPovm { a: f64, b: f64 },

    #[error("non-finite parameter `{0}`")]
    NonFinite(&'static str),

    #[error("alpha = {0} outside (0, 0.5]")]
    AlphaOutOfRange(f64),

    #[error("conditioning marginal P({outcome}|Q{time}) is zero")]
    ZeroMarginal { time: u8, outcome: i8 },

    #[error("invalid settings distribution: {0}")]
    InvalidDistribution(String),

    #[error("setting ({x},{y}) has zero probability under the estimator's distribution")]
    UnexpectedSetting { x: u8, y: u8 },

    #[error("no trials with setting(s) {0}")]
    MissingSetting(String),

    #[error("invalid trial record: {0}")]
    InvalidTrial(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty grid")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;
