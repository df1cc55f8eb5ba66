use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("episode already finished at step {0}")]
    EpisodeDone(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
