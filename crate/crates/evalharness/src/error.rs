use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bad task label {label:?}: {reason}")]
    TaskLabel { label: String, reason: String },
    #[error("baseline mean is zero for task {0}; normalized score undefined")]
    UndefinedNormalization(String),
    #[error(transparent)]
    Core(#[from] swarmtrack_core::Error),
    #[error(transparent)]
    Net(#[from] swarmtrack_valuenet::Error),
    #[error(transparent)]
    Train(#[from] swarmtrack_trainer::Error),
    #[error("checkpoint {path}: {source}")]
    Checkpoint { path: String, source: swarmtrack_valuenet::Error },
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
