use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged at update {update}: {detail}")]
    Divergence { update: u64, detail: String },
    #[error(transparent)]
    Core(#[from] swarmtrack_core::Error),
    #[error(transparent)]
    Net(#[from] swarmtrack_valuenet::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
