use thiserror::Error;

use crate::constellation::Family;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported constellation: order {order} for family {family:?}")]
    UnsupportedConstellation { order: usize, family: Family },

    #[error("wrong bit-string length: expected {expected}, got {got}")]
    BitLength { expected: usize, got: usize },

    #[error("invalid bit value {0} (bits must be 0 or 1)")]
    BitValue(u8),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rotation pattern {phi} out of range (must be < {limit})")]
    PatternOutOfRange { phi: usize, limit: usize },

    #[error("symbol index {index} is not in a constellation of order {order}")]
    SymbolNotInConstellation { index: usize, order: usize },

    #[error("superimposed alphabet of {size} entries exceeds the enumeration cap of {cap}")]
    EnumerationCap { size: u128, cap: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid user index {user} for {n_users} users")]
    InvalidUser { user: usize, n_users: usize },

    #[error("detection result has no stage for user {0}")]
    MissingStage(usize),

    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),

    #[error("alphabet inconsistent: {0}")]
    Alphabet(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Errors caused by the requested configuration rather than by the run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Toml(_)
                | Error::UnsupportedConstellation { .. }
                | Error::EnumerationCap { .. }
                | Error::InvalidUser { .. }
        )
    }
}
