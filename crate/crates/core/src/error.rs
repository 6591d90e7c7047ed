use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid material `{name}`: {reason}")]
    InvalidMaterial { name: String, reason: String },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("empty bath: no reciprocal-lattice point with 0 < |q| <= {q_cut} fits in a box of {box_length} nm")]
    EmptyBath { box_length: f64, q_cut: f64 },

    #[error("mode set inconsistency: {0}")]
    Consistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("quadrature did not converge: estimated error {error:e} on [{worst_lo}, {worst_hi}]")]
    Quadrature { error: f64, worst_lo: f64, worst_hi: f64 },

    #[error("noise factorization failed at frequency index {index}: residual {residual:e}")]
    Factorization { index: usize, residual: f64 },

    #[error("every trajectory of the ensemble diverged ({0} realizations)")]
    EnsembleDiverged(usize),

    #[error("statistics need at least {needed} realizations, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
