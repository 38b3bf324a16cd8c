//! Provider calls for each stage, with validation and fallbacks applied.

use std::fmt;
use std::sync::Arc;
use std::thread;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::Serialize;
use steer_core::Catalog;
use thiserror::Error;

use crate::context::GenerationContext;
use crate::parse::{parse_as, ArrayObjectScanner};
use crate::prompts::{self, AttributePrompt, ConceptPrompt, TechnicalRow};
use crate::provider::{settings, Message, PromptSettings, Provider, ProviderError, ProviderRequest, Role};
use crate::schema::{
    check_current_values, default_or_midpoint, synthesize_attribute_config, AddEditDecision, AttributeUiConfig,
    BrushSpec, ConceptUiConfig, HierarchySpec, IconVocabulary, RawAttributeResponse, RawDecision, RawDefault,
    RawGroupConfig, RawPalette, RawTechnicalConfig, RawTechnicalResponse, TechnicalUiConfig, ValidationError,
};
use crate::template::RenderError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    AddEdit,
    Brushes,
    Intent,
    ConceptUi,
    AttributeUi,
    DefaultValue,
    Assembly,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::AddEdit => "add_edit",
            Stage::Brushes => "brushes",
            Stage::Intent => "intent",
            Stage::ConceptUi => "concept_ui",
            Stage::AttributeUi => "attribute_ui",
            Stage::DefaultValue => "default_value",
            Stage::Assembly => "assembly",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FailureKind {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("unparseable response: {0}")]
    Parse(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("{0}")]
    Assembly(String),
}

/// A stage failure, surfaced to the caller instead of a result.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage}: {kind}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: impl Into<FailureKind>) -> Self {
        PipelineError {
            stage,
            kind: kind.into(),
        }
    }

    pub fn reason(&self) -> String {
        self.kind.to_string()
    }
}

fn at<E: Into<FailureKind>>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::new(stage, e)
}

/// Everything produced for one modify request before assembly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedPanel {
    pub hierarchy: HierarchySpec,
    /// Aligned with `hierarchy.concepts`.
    pub concepts: Vec<ConceptUiConfig>,
    /// Keyed by attribute name, in hierarchy order.
    pub attributes: IndexMap<String, AttributeUiConfig>,
    /// Keyed by technical parameter name, in hierarchy order.
    pub defaults: IndexMap<String, f64>,
}

/// The generation stages over one provider and catalog.
#[derive(Clone)]
pub struct Pipeline {
    provider: Arc<dyn Provider>,
    catalog: Arc<Catalog>,
    icons: Arc<IconVocabulary>,
}

impl Pipeline {
    pub fn new(provider: Arc<dyn Provider>, catalog: Arc<Catalog>) -> Self {
        Pipeline {
            provider,
            catalog,
            icons: Arc::new(IconVocabulary::bundled()),
        }
    }

    pub fn with_icons(mut self, icons: IconVocabulary) -> Self {
        self.icons = Arc::new(icons);
        self
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn icons(&self) -> &IconVocabulary {
        &self.icons
    }

    fn call(&self, stage: Stage, messages: Vec<Message>, settings: PromptSettings) -> Result<String, PipelineError> {
        let request = ProviderRequest::new(messages, settings);
        let response = self.provider.send(&request).map_err(at(stage))?;
        tracing::debug!(stage = %stage, hash = %request.hash(), latency_ms = response.latency.as_millis() as u64, "response");
        Ok(response.text)
    }

    fn call_json<T: DeserializeOwned>(
        &self,
        stage: Stage,
        messages: Vec<Message>,
        settings: PromptSettings,
    ) -> Result<T, PipelineError> {
        let text = self.call(stage, messages, settings)?;
        parse_as(&text).map_err(|e| {
            tracing::error!(stage = %stage, error = %e, "unparseable response");
            PipelineError::new(stage, FailureKind::Parse(e))
        })
    }

    /// Whether the request asks for a new particle system, and which.
    pub fn decide_add_or_edit(&self, ctx: &GenerationContext) -> Result<AddEditDecision, PipelineError> {
        let stage = Stage::AddEdit;
        let prompt = prompts::add_edit(ctx).map_err(at(stage))?;
        let message = Message::text(Role::User, prompt).with_images(&ctx.images());
        let raw: RawDecision = self.call_json(stage, vec![message], settings::ADD_EDIT)?;
        raw.validate().map_err(at(stage))
    }

    /// Seven scene-grounded brushes. `on_brush` sees each valid brush as soon
    /// as it has streamed in; the returned palette is validated as a whole.
    pub fn generate_brushes(
        &self,
        ctx: &GenerationContext,
        on_brush: &mut dyn FnMut(&BrushSpec),
    ) -> Result<Vec<BrushSpec>, PipelineError> {
        let stage = Stage::Brushes;
        let system = prompts::brush_system(ctx, &self.catalog).map_err(at(stage))?;
        let user = prompts::brush_user().map_err(at(stage))?;
        let request = ProviderRequest::new(
            vec![
                Message::text(Role::System, system),
                Message::text(Role::User, user).with_images(&ctx.images()),
            ],
            settings::BRUSHES,
        );
        let mut scanner = ArrayObjectScanner::new();
        let icons = Arc::clone(&self.icons);
        let mut emitted = 0usize;
        let response = self
            .provider
            .send_stream(&request, &mut |delta| {
                for item in scanner.push(delta) {
                    match serde_json::from_str::<BrushSpec>(&item) {
                        Ok(b) if b.validate(&icons).is_ok() && emitted < crate::schema::PALETTE_SIZE => {
                            emitted += 1;
                            on_brush(&b);
                        }
                        Ok(b) => tracing::warn!(brush = b.brushid, "streamed brush rejected"),
                        Err(e) => tracing::warn!(error = %e, "streamed brush unparseable"),
                    }
                }
            })
            .map_err(at(stage))?;
        let raw: RawPalette =
            parse_as(&response.text).map_err(|e| PipelineError::new(stage, FailureKind::Parse(e)))?;
        raw.validate(&self.icons).map_err(at(stage))
    }

    /// Concept → attribute → technical decomposition of the user's intent.
    pub fn decompose_intent(&self, ctx: &GenerationContext) -> Result<HierarchySpec, PipelineError> {
        let stage = Stage::Intent;
        let prompt = prompts::intent_decomposition(ctx, &self.catalog).map_err(at(stage))?;
        let message = Message::text(Role::User, prompt).with_images(&ctx.images());
        let spec: HierarchySpec = self.call_json(stage, vec![message], settings::INTENT)?;
        spec.validate(&self.catalog).map_err(at(stage))?;
        Ok(spec)
    }

    /// Widget configuration of concept `index` of a validated hierarchy.
    pub fn generate_concept_ui(
        &self,
        ctx: &GenerationContext,
        hierarchy: &HierarchySpec,
        index: usize,
    ) -> Result<ConceptUiConfig, PipelineError> {
        let stage = Stage::ConceptUi;
        let concept = hierarchy.concepts.get(index).ok_or_else(|| {
            PipelineError::new(stage, ValidationError::Invalid(format!("no concept at index {index}")))
        })?;
        let children = concept.attribute_names();
        let siblings: Vec<String> = hierarchy
            .concepts
            .iter()
            .filter(|c| c.name != concept.name)
            .map(|c| c.name.clone())
            .collect();
        let prompt = prompts::concept_ui(
            ctx,
            &ConceptPrompt {
                name: &concept.name,
                description: &concept.description,
                children: &children,
                siblings: &siblings,
                index,
                total: hierarchy.concepts.len(),
            },
        )
        .map_err(at(stage))?;
        let raw: RawGroupConfig =
            self.call_json(stage, vec![Message::text(Role::User, prompt)], settings::CONCEPT_UI)?;
        let clip = |_: &str, v: f64| v.clamp(0.0, 100.0);
        raw.validate(&concept.name, &children, &clip).map_err(at(stage))
    }

    /// Widget configuration of attribute `attribute` of concept `concept`.
    /// If the combined request fails, each technical parameter is requested
    /// on its own and the attribute widget is synthesized.
    pub fn generate_attribute_ui(
        &self,
        ctx: &GenerationContext,
        hierarchy: &HierarchySpec,
        concept: usize,
        attribute: usize,
    ) -> Result<AttributeUiConfig, PipelineError> {
        let stage = Stage::AttributeUi;
        let c = hierarchy.concepts.get(concept);
        let (c, a) = c
            .and_then(|c| c.attributes.get(attribute).map(|a| (c, a)))
            .ok_or_else(|| {
                PipelineError::new(
                    stage,
                    ValidationError::Invalid(format!("no attribute at ({concept}, {attribute})")),
                )
            })?;
        let children = a.technical_names();
        check_current_values(&children, &ctx.current_values).map_err(at(stage))?;
        let rows: Vec<TechnicalRow<'_>> = a
            .technical_parameters
            .iter()
            .map(|t| TechnicalRow {
                name: &t.name,
                relevance: &t.description,
                current: ctx.current_values[&t.name],
            })
            .collect();
        let combined = self.attribute_request(ctx, &a.name, &a.description, &c.name, rows.clone());
        let first_error = match combined.and_then(|raw: RawAttributeResponse| {
            raw.validate(&a.name, &children, &self.catalog, &ctx.current_values)
                .map_err(at(stage))
        }) {
            Ok(cfg) => return Ok(cfg),
            Err(e) => e,
        };
        tracing::warn!(attribute = %a.name, error = %first_error, "falling back to per-parameter generation");

        let mut technical = Vec::with_capacity(rows.len());
        for row in rows {
            let name = row.name.to_string();
            let current = row.current;
            let raw: RawTechnicalResponse = self.attribute_request(ctx, &a.name, &a.description, &c.name, vec![row])?;
            let spec = self.catalog.get(&name).expect("validated hierarchy");
            let t = raw
                .technical_parameter_configs
                .into_iter()
                .find(|t| t.parameter_name == name)
                .ok_or_else(|| {
                    PipelineError::new(stage, ValidationError::Invalid(format!("no technical config for {name}")))
                })
                .and_then(|t: RawTechnicalConfig| t.validate(spec, current).map_err(at(stage)))?;
            technical.push(t);
        }
        Ok(AttributeUiConfig {
            attribute_config: synthesize_attribute_config(&a.name, &technical),
            technical_parameter_configs: technical,
            fallback: true,
        })
    }

    fn attribute_request<T: DeserializeOwned>(
        &self,
        ctx: &GenerationContext,
        name: &str,
        description: &str,
        concept: &str,
        rows: Vec<TechnicalRow<'_>>,
    ) -> Result<T, PipelineError> {
        let stage = Stage::AttributeUi;
        let prompt = prompts::attribute_ui(
            ctx,
            &self.catalog,
            &AttributePrompt {
                name,
                description,
                concept,
                rows,
            },
        )
        .map_err(at(stage))?;
        let message = Message::text(Role::User, prompt).with_images(&ctx.images());
        self.call_json(stage, vec![message], settings::ATTRIBUTE_UI)
    }

    /// Suggested starting value for `name` inside its generated range; the
    /// midpoint whenever the call fails or answers out of range.
    pub fn infer_default(&self, ctx: &GenerationContext, name: &str, min: f64, max: f64) -> f64 {
        let stage = Stage::DefaultValue;
        let value = prompts::default_value(ctx, &self.catalog, name, min, max)
            .map_err(at(stage))
            .and_then(|prompt| {
                let message = Message::text(Role::User, prompt).with_images(&ctx.images());
                self.call_json::<RawDefault>(stage, vec![message], settings::DEFAULT_VALUE)
            });
        match value {
            Ok(v) => {
                let out = default_or_midpoint(Some(v.default_value), min, max);
                if out != v.default_value {
                    tracing::warn!(parameter = name, returned = v.default_value, "default out of range, using midpoint");
                }
                out
            }
            Err(e) => {
                tracing::warn!(parameter = name, error = %e, "default generation failed, using midpoint");
                default_or_midpoint(None, min, max)
            }
        }
    }

    /// Decomposes the intent, then generates every concept, attribute and
    /// default concurrently. The result does not depend on completion order.
    pub fn generate_panel(&self, ctx: &GenerationContext) -> Result<GeneratedPanel, PipelineError> {
        let hierarchy = self.decompose_intent(ctx)?;
        let attribute_slots: Vec<(usize, usize)> = hierarchy
            .concepts
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| (0..c.attributes.len()).map(move |ai| (ci, ai)))
            .collect();

        let h = &hierarchy;
        let (concepts, attributes) = thread::scope(|s| {
            let concept_jobs: Vec<_> = (0..h.concepts.len())
                .map(|i| s.spawn(move || self.generate_concept_ui(ctx, h, i)))
                .collect();
            let attribute_jobs: Vec<_> = attribute_slots
                .iter()
                .map(|&(ci, ai)| s.spawn(move || self.generate_attribute_ui(ctx, h, ci, ai)))
                .collect();
            let concepts: Vec<_> = concept_jobs.into_iter().map(join).collect();
            let attributes: Vec<_> = attribute_jobs.into_iter().map(join).collect();
            (concepts, attributes)
        });
        let concepts = concepts.into_iter().collect::<Result<Vec<_>, _>>()?;
        let attributes = attributes.into_iter().collect::<Result<Vec<_>, _>>()?;

        let ranges: Vec<&TechnicalUiConfig> =
            attributes.iter().flat_map(|a| a.technical_parameter_configs.iter()).collect();
        let defaults: Vec<f64> = thread::scope(|s| {
            let jobs: Vec<_> = ranges
                .iter()
                .map(|t| s.spawn(move || self.infer_default(ctx, &t.parameter_name, t.min, t.max)))
                .collect();
            jobs.into_iter().map(join).collect()
        });
        let defaults = ranges
            .iter()
            .map(|t| t.parameter_name.clone())
            .zip(defaults)
            .collect();
        let attributes = attribute_slots
            .iter()
            .map(|&(ci, ai)| hierarchy.concepts[ci].attributes[ai].name.clone())
            .zip(attributes)
            .collect();
        Ok(GeneratedPanel {
            hierarchy,
            concepts,
            attributes,
            defaults,
        })
    }
}

fn join<T>(h: thread::ScopedJoinHandle<'_, T>) -> T {
    h.join().unwrap_or_else(|p| std::panic::resume_unwind(p))
}
