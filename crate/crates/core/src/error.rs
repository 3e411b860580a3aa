use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JacobiError {
    #[error("model misconfigured: {0}")]
    Model(String),
    #[error("coefficient a_{index} = {value} is not positive")]
    NonPositive { index: i64, value: f64 },
    #[error("index {0} lies outside the tabulated range and no tail family is declared")]
    OutOfTable(usize),
    #[error("inconsistent tail: {0}")]
    InconsistentTail(String),
    #[error("tail bound unavailable: {0}")]
    NoTailBound(String),
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("unsupported regime: |beta_inf| = 1 within tolerance (beta_inf = {0})")]
    Unsupported(f64),
    #[error("not converged: certificate {certificate:e} exceeds {limit:e}")]
    NotConverged { certificate: f64, limit: f64 },
    #[error("near-critical beta_{index} = {beta}")]
    NearCritical { index: usize, beta: f64 },
    #[error("Jost solution vanishes at n = {0}")]
    ZeroCrossing(usize),
    #[error("degenerate Wronskian: measured {measured}, expected {expected}")]
    DegenerateWronskian { measured: String, expected: String },
    #[error("resolvent pole: |Omega| = {0:e}")]
    PoleAtZ(f64),
    #[error("precision insufficient: {0}")]
    Precision(String),
    #[error("log-scale overflow at n = {0}")]
    Overflow(i64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, JacobiError>;
