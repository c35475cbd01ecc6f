use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension {dim} exceeds the dense cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ill-conditioned eigenbasis: min overlap {min_overlap:e} at index {index}")]
    IllConditioned { min_overlap: f64, index: usize },
    #[error("unsupported precision: {0}")]
    Precision(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("not relaxed: d(t_max) = {final_distance:e} above threshold {threshold}")]
    NotRelaxed { final_distance: f64, threshold: f64 },
    #[error("integrator step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("vanishing denominator for pair ({j}, {jp})")]
    Degenerate { j: usize, jp: usize },
    #[error("Krylov solver did not converge: residuals {0:?}")]
    NoConvergence(Vec<f64>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse: {0}")]
    Parse(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl Error {
    /// Stable variant name for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalidModel",
            Error::DimensionCap { .. } => "dimensionCap",
            Error::DimensionMismatch { .. } => "dimensionMismatch",
            Error::IllConditioned { .. } => "illConditioned",
            Error::Precision(_) => "precision",
            Error::Linalg(_) => "linalg",
            Error::InvalidState(_) => "invalidState",
            Error::Fit(_) => "fit",
            Error::NotRelaxed { .. } => "notRelaxed",
            Error::StepUnderflow(_) => "stepUnderflow",
            Error::Degenerate { .. } => "degenerate",
            Error::NoConvergence(_) => "noConvergence",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
