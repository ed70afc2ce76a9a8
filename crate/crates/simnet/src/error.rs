use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event at t = {t} refers to unknown flow {flow}")]
    UnknownFlow { t: f64, flow: usize },
    #[error("not stationary within {0} s")]
    NotStationary(f64),
    #[error("malformed trace log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
