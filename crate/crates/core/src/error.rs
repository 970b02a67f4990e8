use thiserror::Error;

/// Every failure the estimators can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside [{min}, {max}]")]
    Range {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{value} is not a grid point")]
    NotGridPoint { value: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("error series diverges: ratio {ratio} >= 1")]
    Divergence { ratio: f64 },

    #[error("imaginary residue {imag:e} on a real input (real part {real:e})")]
    RealityViolation { imag: f64, real: f64 },

    #[error("state of {requested} amplitudes exceeds the cap of {limit}; {suggestion}")]
    Resource {
        requested: u128,
        limit: usize,
        suggestion: String,
    },

    #[error("row {row}: {candidates} sparse candidates fit the residues")]
    Ambiguity { row: usize, candidates: usize },

    #[error("row {row}: {detail}")]
    Inconsistency { row: usize, detail: String },

    #[error("wrong lattice: {0}")]
    WrongLattice(String),
}

pub type Result<T> = std::result::Result<T, Error>;
