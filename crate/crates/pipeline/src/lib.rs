//! Turns a text or sketch intent into a validated control panel.
//!
//! Prompts are rendered from bundled [`template`]s, sent through a
//! [`provider`], parsed and checked against [`schema`], and the results are
//! nested into a [`steer_core::PanelConfig`] by [`assemble`].

pub mod assemble;
pub mod context;
pub mod generate;
pub mod parse;
pub mod prompts;
pub mod provider;
pub mod schema;
pub mod template;

pub use assemble::{assemble_panel, write_through};
pub use context::{BrushDescriptor, GenerationContext, SceneObject, Sketch, Stroke};
pub use generate::{FailureKind, GeneratedPanel, Pipeline, PipelineError, Stage};
pub use provider::{
    FixtureProvider, LiveProvider, Provider, ProviderConfig, ProviderError, ProviderRequest, ProviderResponse,
    RecordingProvider, ScriptedProvider,
};
pub use schema::{
    AddEditDecision, AttributeUiConfig, BrushSpec, ConceptUiConfig, GroupUiConfig, HierarchySpec, IconVocabulary,
    TechnicalUiConfig, ValidationError,
};
pub use template::{render, RenderError, TemplateId, Vars};
