use sl2kern::kernel::KernelError;
use sl2kern::numerics::NumericsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Certification(_) => 2,
            CliError::NonConvergence(_) => 3,
            _ => 1,
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::Certification(m) => CliError::Certification(m),
            KernelError::Numerics(n @ NumericsError::NonConvergence { .. }) => {
                CliError::NonConvergence(n.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}
