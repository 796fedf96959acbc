use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("video too short: {frames} frame(s), need at least 2")]
    TooShort { frames: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("unsupported stream: {0}")]
    UnsupportedStream(String),
    #[error("corrupt stream: crc mismatch (stored {stored:08x}, computed {computed:08x})")]
    CorruptStream { stored: u32, computed: u32 },
    #[error("malformed stream: {0}")]
    MalformedStream(String),
    #[error("rate-distortion curves have no overlapping distortion range")]
    NoOverlap,
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn payload(msg: impl Into<String>) -> Self {
        Error::MalformedPayload(msg.into())
    }

    /// True for errors raised by a generation backend.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::BackendUnavailable(_) | Error::ProtocolViolation(_))
    }
}
