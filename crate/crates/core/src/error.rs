use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("number of STAs must be in 1..=16, got {0}")]
    StaCount(u32),

    #[error("SAW duration code must be in 1..=127, got {0}")]
    SawDurationCode(u32),

    #[error("SAW period code must be at least 1, got {0}")]
    SawPeriodCode(u32),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("no data subcarrier entry for a {0}-tone RU")]
    UnknownRu(u32),

    #[error("MCS index must be in 0..=11, got {0}")]
    UnknownMcs(u32),

    #[error("{0} must be strictly positive")]
    NonPositive(&'static str),

    #[error("line {line}: {reason}")]
    ParamFile { line: usize, reason: String },

    #[error("trace line {line}: {reason}")]
    Trace { line: usize, reason: String },

    #[error("{0}")]
    Metric(&'static str),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
