use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("threshold infeasible: best {best} < threshold {threshold}")]
    ThresholdInfeasible { best: f64, threshold: f64 },
    #[error("distribution not in zeta(alpha): norm {norm} < sqrt(alpha) {bound}")]
    NotInZeta { norm: f64, bound: f64 },
    #[error("generator not mature: step {step} < maturity {maturity}")]
    NotMature { step: String, maturity: String },
    #[error("dispersion constraint unsatisfiable for |i| = {weight}")]
    DispersionConstraint { weight: usize },
    #[error("reconciliation failed: {0}")]
    ReconciliationFailed(String),
    #[error("internal consistency: {0}")]
    Consistency(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
