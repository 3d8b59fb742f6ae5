//! Process-level error type with the stable exit-code contract: 0 on
//! success, 1 for I/O or data failures, 2 for configuration mistakes.

use std::fmt;

use ehgcn::event::EventError;
use ehgcn::hypergraph::HypergraphError;
use ehgcn::network::NetworkError;
use ehgcn::pipeline::PipelineError;
use ehgcn::sampling::SamplingError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, malformed config files, invalid parameter values.
    Config(String),
    /// Unreadable or malformed inputs, write failures, and runtime data
    /// problems such as divergence or shape mismatches.
    Data(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Data(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EventError> for CliError {
    fn from(e: EventError) -> Self {
        match e {
            // Invalid scene specs and zero-length windows are caller
            // mistakes, not broken data.
            EventError::Scene(_) | EventError::ZeroWindow => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::InvalidConfig(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<HypergraphError> for CliError {
    fn from(e: HypergraphError) -> Self {
        match e {
            HypergraphError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Sampling(inner) => inner.into(),
            PipelineError::Hypergraph(inner) => inner.into(),
            PipelineError::Network(inner) => inner.into(),
        }
    }
}
