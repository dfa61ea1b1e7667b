//! Error classification for exit codes.
//!
//! Every failure collapses into one of three kinds: `Config` (exit 2,
//! the invocation or a config/motif file is wrong), `Data` (exit 3, a
//! dataset or artifact is missing or malformed), and `Numeric` (exit 4,
//! divergence or a failed gradient check). The message is always a single
//! line so scripts can parse stderr as `<kind> error: <reason>`.

use std::fmt;

use sphnn_core::checkpoint::CheckpointError;
use sphnn_core::hin::HinError;
use sphnn_core::hypergraph::HypergraphError;
use sphnn_core::model::ModelError;
use sphnn_core::motif::MotifError;
use sphnn_core::synth::SynthError;
use sphnn_core::train::TrainError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        };
        write!(f, "{} error: {}", self.kind(), msg.replace('\n', " "))
    }
}

impl From<HinError> for CliError {
    fn from(e: HinError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<HypergraphError> for CliError {
    fn from(e: HypergraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MotifError> for CliError {
    fn from(e: MotifError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Graph(inner) => CliError::Data(inner.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::BadConfig(_) => CliError::Config(e.to_string()),
            ModelError::NonFinite(_) => CliError::Numeric(e.to_string()),
            ModelError::Numeric(_) => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::BadRate(_) => CliError::Config(e.to_string()),
            TrainError::Diverged { .. } => CliError::Numeric(e.to_string()),
            TrainError::Numeric(_) => CliError::Numeric(e.to_string()),
            TrainError::Model(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Model(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Data("x".into()).exit_code(), 3);
        assert_eq!(CliError::Numeric("x".into()).exit_code(), 4);
    }

    #[test]
    fn display_is_one_prefixed_line() {
        let e = CliError::Data("first\nsecond".into());
        let text = e.to_string();
        assert_eq!(text, "data error: first second");
        assert_eq!(text.lines().count(), 1);
    }
}
