use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside the domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("no loss event has been observed yet")]
    NoLossYet,

    #[error("cannot re-initialise the loss history from an empty rate measurement")]
    EmptyMeasurement,

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: u32 },

    #[error("closed form and step oracle diverge at NFI {index} ({field}: closed {closed}, oracle {oracle})")]
    OracleMismatch {
        index: usize,
        field: &'static str,
        closed: f64,
        oracle: f64,
    },

    #[error("truncated option area at offset {offset}: {reason}")]
    Truncated { offset: usize, reason: &'static str },

    #[error("unknown technology {0:?}")]
    UnknownTechnology(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check(name: &'static str, value: f64, domain: &'static str, ok: bool) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain,
        })
    }
}
