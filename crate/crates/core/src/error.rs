//! Error type shared by every module.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{field} = {value} is outside [0, 1]")]
    OutOfRange { field: &'static str, value: f64 },

    #[error("classic BKT requires p_forget = 0, got {0}")]
    ForgettingNonzero(f64),

    #[error("identified parameters require p_guess < 0.5 and p_slip < 0.5 (p_guess = {p_guess}, p_slip = {p_slip})")]
    Unidentified { p_guess: f64, p_slip: f64 },

    #[error("p_learn = p_forget = 0: the chain has no unique stationary distribution")]
    Reducible,

    #[error("p_learn = {p_learn}, p_forget = {p_forget}: both must be positive for an ergodic chain")]
    NonErgodic { p_learn: f64, p_forget: f64 },

    #[error("response at attempt {attempt} has probability zero under the parameters")]
    ZeroLikelihood { attempt: usize },

    #[error("skill {0} has no sequences in the panel")]
    UnknownSkill(u32),

    #[error("initial parameters violate the requested constraints: {0}")]
    InvalidInit(String),

    #[error("all responses are identical; an unconstrained fit is not identified")]
    DegenerateData,

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid item parameters: {0}")]
    InvalidItem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("{name} = {value} is outside its domain (must be <= 0)")]
    OutOfDomain { name: &'static str, value: f64 },

    #[error("network has {0} nodes; exact enumeration supports at most 20")]
    TooLarge(usize),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "OutOfRange",
            Error::ForgettingNonzero(_) => "ForgettingNonzero",
            Error::Unidentified { .. } => "Unidentified",
            Error::Reducible => "Reducible",
            Error::NonErgodic { .. } => "NonErgodic",
            Error::ZeroLikelihood { .. } => "ZeroLikelihood",
            Error::UnknownSkill(_) => "UnknownSkill",
            Error::InvalidInit(_) => "InvalidInit",
            Error::DegenerateData => "DegenerateData",
            Error::InvalidPanel(_) => "InvalidPanel",
            Error::InvalidItem(_) => "InvalidItem",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InsufficientData(_) => "InsufficientData",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::TooLarge(_) => "TooLarge",
            Error::InvalidNetwork(_) => "InvalidNetwork",
            Error::Precondition(_) => "Precondition",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    /// True for I/O and decoding failures, false for modelling errors.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}
