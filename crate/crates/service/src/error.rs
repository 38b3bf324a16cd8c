use serde::{Deserialize, Serialize};
use steer_core::{ControlError, EngineError};
use steer_pipeline::PipelineError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("invalid scene manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("session has no active panel")]
    NoPanel,
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("`{node}` value {value} is outside [{min}, {max}]")]
    OutOfRange { node: String, value: f64, min: f64, max: f64 },
    #[error("sketch uses brush {0}, which is not in the palette")]
    UnknownBrush(u32),
    #[error("panel was generated for `{panel}` but the session runs `{session}`")]
    PanelMismatch { panel: String, session: String },
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("session is closed")]
    Closed,
}

/// Error document returned to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub stage: String,
    pub reason: String,
}

impl ServiceError {
    /// Which part of the workflow failed: a pipeline stage, or one of
    /// `session`, `scene`, `sketch`, `control`, `engine`, `panel`, `request`.
    pub fn stage(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) | ServiceError::Closed => "session",
            ServiceError::InvalidManifest(_) => "scene",
            ServiceError::Pipeline(e) => e.stage.as_str(),
            ServiceError::NoPanel | ServiceError::PanelMismatch { .. } => "panel",
            ServiceError::Control(ControlError::Version { .. } | ControlError::Malformed(_)) => "panel",
            ServiceError::Control(_) => "control",
            ServiceError::OutOfRange { .. } | ServiceError::Engine(_) => "engine",
            ServiceError::UnknownBrush(_) => "sketch",
            ServiceError::Malformed(_) => "request",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let reason = match self {
            ServiceError::Pipeline(e) => e.reason(),
            other => other.to_string(),
        };
        ErrorBody {
            stage: self.stage().to_string(),
            reason,
        }
    }

    /// HTTP status code for this error.
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::UnknownSession(_) => 404,
            ServiceError::Control(ControlError::UnknownNode(_) | ControlError::UnknownPreset { .. }) => 404,
            ServiceError::Control(ControlError::Locked(_)) | ServiceError::NoPanel => 409,
            ServiceError::PanelMismatch { .. } | ServiceError::Closed => 409,
            ServiceError::Pipeline(_) => 502,
            _ => 422,
        }
    }
}
