use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sim(#[from] tfrc_simnet::SimError),
    #[error("warm-up failed: {0}")]
    Warmup(String),
    #[error("trace contains no completed handover")]
    NoHandover,
    #[error("measurement window ends at {end} s, after the trace ({trace_end} s)")]
    WindowPastEnd { end: f64, trace_end: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
