use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported dimension {0} (expected 2, 3 or 4)")]
    UnsupportedDimension(usize),
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("degenerate map at {point:?}: |det J| = {det:e}")]
    DegenerateMap { point: Vec<f64>, det: f64 },
    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },
    #[error("initialization error: {0}")]
    Init(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("fundamental-solution fit stalled at residual {residual:e} (tolerance {tol:e})")]
    MfsConvergence { residual: f64, tol: f64, best: Box<crate::pde::MfsModel> },
    #[error("optimizer aborted: {0}")]
    Optimizer(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
