use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid count: {0}")]
    InvalidCount(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("singular resolvent on step [{t1}, {t2}]")]
    SingularStep { t1: f64, t2: f64 },
    #[error("kernel under-resolved: {0}")]
    Resolution(String),
    #[error("point outside tubular neighborhood: |u| = {norm} >= {radius}")]
    OutsideTube { norm: f64, radius: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}
