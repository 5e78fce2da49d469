use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("displacement indices have different moduli ({left} vs {right})")]
    ModulusMismatch { left: usize, right: usize },

    #[error("dimension {d} is not supported: {reason}")]
    UnsupportedDimension { d: usize, reason: String },

    #[error("input is not a SIC (max overlap deviation {deviation:.3e} at {worst})")]
    NotSic { deviation: f64, worst: String },

    #[error("Gram matrix is not tight: (d/n)G misses projector by {deviation:.3e}")]
    NotTight { deviation: f64 },

    #[error("matrix fails the {check} check (deviation {deviation:.3e})")]
    StructureViolation { check: &'static str, deviation: f64 },

    #[error("solver did not converge after {restarts} restarts (best potential gap {best_gap:.3e})")]
    NoConvergence { restarts: usize, best_gap: f64 },

    #[error("unknown registry label {0:?}")]
    UnknownLabel(String),

    #[error("invalid F matrix: {0}")]
    InvalidFMatrix(String),

    #[error("residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("parameter {value} lies outside the admissible domain {domain}")]
    Domain { value: f64, domain: String },

    #[error("branch inconsistency: |{quantity}| deviates from 1 by {deviation:.3e}")]
    BranchInconsistency { quantity: &'static str, deviation: f64 },

    #[error("defect system lost gauge directions: raw nullity {raw_nullity} < gauge dimension {gauge}")]
    GaugeInconsistency { raw_nullity: usize, gauge: usize },

    #[error("invalid phase data: {0}")]
    InvalidPhases(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "not_square",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::NonFinite { .. } => "non_finite",
            Error::ModulusMismatch { .. } => "modulus_mismatch",
            Error::UnsupportedDimension { .. } => "unsupported_dimension",
            Error::NotSic { .. } => "not_sic",
            Error::NotTight { .. } => "not_tight",
            Error::StructureViolation { .. } => "structure_violation",
            Error::NoConvergence { .. } => "no_convergence",
            Error::UnknownLabel(_) => "unknown_label",
            Error::InvalidFMatrix(_) => "invalid_f_matrix",
            Error::ResidualTooLarge { .. } => "residual_too_large",
            Error::Domain { .. } => "domain",
            Error::BranchInconsistency { .. } => "branch_inconsistency",
            Error::GaugeInconsistency { .. } => "gauge_inconsistency",
            Error::InvalidPhases(_) => "invalid_phases",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
