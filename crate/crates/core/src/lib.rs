//! Core of the semantic particle-effect controller: the technical parameter
//! [`catalog`], a deterministic particle [`engine`] and the synchronized
//! three-level [`control`] tree.
//!
//! The engine and the control tree are generic over [`Real`]; the aliases
//! below fix them to `f64`, which is what the service and CLI use.

pub mod catalog;
pub mod control;
pub mod engine;
pub mod scalar;

pub use catalog::{Catalog, CatalogError, ParamPath, ParamSpec, Violation};
pub use control::{ControlError, ControlRange, Level, NodeChange};
pub use engine::{EngineError, TemplateKind};
pub use scalar::Real;

pub type SystemState = engine::SystemState<f64>;
pub type EmitterConfig = engine::EmitterConfig<f64>;
pub type Particle = engine::Particle<f64>;
pub type Snapshot = engine::Snapshot<f64>;
pub type PanelConfig = control::PanelConfig<f64>;
pub type ControlNode = control::ControlNode<f64>;
pub type SyncEvent = control::SyncEvent<f64>;
pub type Preset = control::Preset<f64>;
pub type ValuePreset = control::ValuePreset<f64>;
