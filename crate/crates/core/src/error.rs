use thiserror::Error;

use crate::lattice::Site;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty volume")]
    EmptyVolume,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("inner volume is not contained in the outer volume (first stray site {0})")]
    NotContained(Site),

    #[error("missing value at site {0}")]
    MissingSite(Site),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("symbol {0} is not accepted here")]
    InvalidSymbol(String),

    #[error("conditioning on null symbol {0} (zero a-priori weight)")]
    NullSymbol(String),

    #[error("probabilities do not sum to one (sum = {0})")]
    NotNormalized(f64),

    #[error("{what}: {count} configurations exceed the cap of {cap}; {advice}")]
    Infeasible {
        what: &'static str,
        count: f64,
        cap: f64,
        advice: &'static str,
    },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("model: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;
