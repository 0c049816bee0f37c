use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("density value {value} at node {index} is not strictly positive")]
    NonPositiveDensity { index: usize, value: f64 },

    #[error("integration box [{lo}, {hi}] on axis {axis} leaves the unit cube")]
    BoxOutOfDomain { axis: usize, lo: f64, hi: f64 },

    #[error("marginal density vanishes at the conditioning context")]
    ZeroMarginal,

    #[error("grid resolution {resolution} is too coarse (need at least {required} points per axis)")]
    InsufficientResolution { resolution: usize, required: usize },

    #[error("Jacobian is degenerate: diagonal partial {value:e} on axis {axis}")]
    DegenerateJacobian { axis: usize, value: f64 },

    #[error("root of component {axis} is not bracketed (target {target})")]
    RootNotBracketed { axis: usize, target: f64 },

    #[error("discriminator value {value} is outside the open unit interval")]
    DiscriminatorOutOfRange { value: f64 },

    #[error("parameter {index} = {value} lies outside [{lo}, {hi}]")]
    ParamsOutOfBox { index: usize, value: f64, lo: f64, hi: f64 },

    #[error("net would contain {cardinality} members, above the cap of {cap}")]
    NetTooLarge { cardinality: u128, cap: usize },

    #[error("entropy integral diverges: d/(2(alpha+k-1)) = {exponent} >= 1")]
    IntegralDivergent { exponent: f64 },

    #[error("norm bound K = {k_bound} cannot be certified: {reason}")]
    NotCertified { k_bound: f64, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable kind, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveDensity { .. } => "NonPositiveDensity",
            Error::BoxOutOfDomain { .. } => "BoxOutOfDomain",
            Error::ZeroMarginal => "ZeroMarginal",
            Error::InsufficientResolution { .. } => "InsufficientResolution",
            Error::DegenerateJacobian { .. } => "DegenerateJacobian",
            Error::RootNotBracketed { .. } => "RootNotBracketed",
            Error::DiscriminatorOutOfRange { .. } => "DiscriminatorOutOfRange",
            Error::ParamsOutOfBox { .. } => "ParamsOutOfBox",
            Error::NetTooLarge { .. } => "NetTooLarge",
            Error::IntegralDivergent { .. } => "IntegralDivergent",
            Error::NotCertified { .. } => "NotCertified",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Parse(_) => "Parse",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
