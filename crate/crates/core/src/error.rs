use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("grid mismatch: {0}")]
    Grid(String),

    #[error("cost cap exceeded: predicted {predicted:.3e} operations, cap {cap:.3e}")]
    CostCap { predicted: f64, cap: f64 },

    #[error("numerical failure in {stage}: {message}")]
    Numerical { stage: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn numerical(stage: &str, message: impl Into<String>) -> Self {
        Error::Numerical {
            stage: stage.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
