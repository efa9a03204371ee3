use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("tabulated weight has no sample at level m={0}")]
    MissingSample(u32),
    #[error("theta is not positive at level m={m} (value {value})")]
    NonPositiveTheta { m: u32, value: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("horizon exhausted: {0}")]
    HorizonExhausted(String),
    #[error("infeasible level m={m}: {reason}")]
    Infeasible { m: u32, reason: String },
    #[error("point budget exceeded: {requested} points requested, budget {budget}")]
    Budget { requested: u128, budget: usize },
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("format error in {field}: {reason}")]
    Format { field: String, reason: String },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn format(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
