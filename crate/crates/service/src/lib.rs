//! Session-oriented service over the particle engine, the control tree and
//! the generation pipeline. Each session owns one particle system and at
//! most one panel; all mutations of a session are applied in a single
//! serial order by its worker thread.

pub mod error;
pub mod http;
pub mod session;
pub mod setup;

pub use error::{ErrorBody, ServiceError};
pub use http::router;
pub use session::{
    ControlAction, ControlUpdate, IntentOutcome, IntentRequest, NodeValue, PaletteStatus, SceneManifest,
    SessionHandle, SessionManager, SessionState, SessionView, SketchSubmission,
};
pub use setup::{ProviderArgs, ProviderKind, SetupError};
