use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid energy: {0}")]
    InvalidEnergy(String),

    #[error("invalid labeling: {0}")]
    InvalidLabeling(String),

    #[error("cannot compose partial labelings: node {0} is assigned on both sides")]
    Composition(usize),

    #[error("neighbor assignment is missing node {0}")]
    MissingNeighbor(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration of {size} assignments exceeds the cap of {cap}")]
    TooLarge { size: u128, cap: u128 },

    #[error("no certificate: {0}")]
    NoCertificate(String),

    #[error("no expansion bound: {0}")]
    NoBeta(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("records belong to different instances: {0} vs {1}")]
    InstanceMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidEnergy(_) => "invalid_energy",
            Error::InvalidLabeling(_) => "invalid_labeling",
            Error::Composition(_) => "composition",
            Error::MissingNeighbor(_) => "missing_neighbor",
            Error::Domain(_) => "domain",
            Error::TooLarge { .. } => "too_large",
            Error::NoCertificate(_) => "no_certificate",
            Error::NoBeta(_) => "no_beta",
            Error::Config(_) => "config",
            Error::InstanceMismatch(..) => "instance_mismatch",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
