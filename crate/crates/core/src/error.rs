use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Requested a filter family / overlap factor combination with no
    /// published design.
    #[error("unsupported design: {0}")]
    UnsupportedDesign(String),

    /// Parameter outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched grid / waveform dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// NaN or other numerical failure detected in a pipeline.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
