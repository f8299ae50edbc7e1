use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] dampwave_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot encode configuration: {0}")]
    Emit(#[from] toml::ser::Error),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(vec![msg.into()])
    }

    /// Process exit status: 64 for configuration errors, 2 for undersampled
    /// estimates, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Core(dampwave_core::Error::Config(_)) => 64,
            LabError::Core(dampwave_core::Error::Undersampled(_)) => 2,
            _ => 1,
        }
    }
}
