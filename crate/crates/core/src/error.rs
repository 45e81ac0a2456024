use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basepoint mismatch: {0}")]
    BasepointMismatch(String),
    #[error("window exhausted: order {needed} requested but series known only below order {available}")]
    WindowExhausted { needed: i32, available: i32 },
    #[error("not invertible: {0}")]
    NotInvertible(String),
    #[error("invalid germ: {0}")]
    InvalidGerm(String),
    #[error("cross-side product {0}")]
    CrossSide(String),
    #[error("truncation too small: need {need}, have {have}")]
    TruncationTooSmall { need: usize, have: usize },
    #[error("lossy truncation in {0}")]
    Lossy(String),
    #[error("genericity failure at order {0}")]
    Genericity(i32),
    #[error("hulls touch or overlap: {0}")]
    Contact(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable tag for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::BasepointMismatch(_) => "basepoint-mismatch",
            Error::WindowExhausted { .. } => "window-exhausted",
            Error::NotInvertible(_) => "not-invertible",
            Error::InvalidGerm(_) => "invalid-germ",
            Error::CrossSide(_) => "cross-side",
            Error::TruncationTooSmall { .. } => "truncation-too-small",
            Error::Lossy(_) => "lossy",
            Error::Genericity(_) => "genericity",
            Error::Contact(_) => "contact",
            Error::Quadrature(_) => "quadrature",
            Error::Invalid(_) => "invalid",
        }
    }
}
