//! Slot values for each template, built from a [`GenerationContext`].

use std::collections::BTreeMap;

use serde_json::json;
use steer_core::{Catalog, TemplateKind};

use crate::context::{GenerationContext, Sketch};
use crate::template::{render, RenderError, TemplateId, Vars};

/// Names offered to the add/edit decision, in library order.
pub const AVAILABLE_TYPES: &str = "fire, fountain, firework, bubbles, trail-effect";

const SKETCH_PRESENT: &str = "and the sketch overlay drawn by the user";
const SKETCH_ABSENT: &str = "only";
const NO_SKETCH: &str = "no sketch provided";
const BRUSH_CONTEXT: &str = "4. **BRUSH CONTEXT**: Prefer technical parameters that realize the effects of the brushes used in the sketch, and name concepts and attributes after those effects";
const GUIDANCE_WITH_SKETCH: &str = "Use the sketch overlay to decide where and how strongly the particle system should change, and the used brushes to decide which effects to target";
const GUIDANCE_WITHOUT_SKETCH: &str = "Ground names and parameter choices in the current scene and the objects it contains";

/// How a template kind is named in prompts.
pub fn prompt_type_name(kind: TemplateKind) -> &'static str {
    match kind {
        TemplateKind::Trail => "trail-effect",
        other => other.as_str(),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn vec3(p: [f64; 3]) -> String {
    format!("[{}, {}, {}]", num(p[0]), num(p[1]), num(p[2]))
}

/// `fire emitter at [0, 0, 0], table at [5, 0, 3]`.
pub fn scene_text(ctx: &GenerationContext) -> String {
    let mut parts = vec![format!("{} emitter at {}", ctx.system_type, vec3(ctx.position))];
    parts.extend(ctx.scene.iter().map(|o| format!("{} at {}", o.name, vec3(o.position))));
    parts.join(", ")
}

/// One clause per stroke with its brush, endpoints and point count.
pub fn sketch_text(sketch: Option<&Sketch>) -> String {
    let Some(sketch) = sketch.filter(|s| !s.is_empty()) else {
        return NO_SKETCH.to_string();
    };
    sketch
        .strokes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let brush = match s.brush.and_then(|id| sketch.brushes.get(&id).map(|b| (id, b))) {
                Some((id, b)) => format!("brush {id}: \"{}\", {}", b.functionality, b.color),
                None => "annotation".to_string(),
            };
            let pt = |p: &[f64; 2]| format!("[{}, {}]", num(p[0]), num(p[1]));
            match (s.points.first(), s.points.last()) {
                (Some(a), Some(b)) => format!(
                    "stroke {} ({brush}) from {} to {} over {} points",
                    i + 1,
                    pt(a),
                    pt(b),
                    s.points.len()
                ),
                _ => format!("stroke {} ({brush}) with no points", i + 1),
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// `- name: description` per catalog entry.
pub fn parameter_details(catalog: &Catalog) -> String {
    catalog
        .iter()
        .map(|s| format!("- {}: {}", s.name, s.description))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn technical_parameters(catalog: &Catalog) -> String {
    catalog.names().collect::<Vec<_>>().join(", ")
}

pub fn parameter_descriptions_json(catalog: &Catalog) -> String {
    let map: serde_json::Map<String, serde_json::Value> = catalog
        .iter()
        .map(|s| (s.name.clone(), json!(s.description)))
        .collect();
    serde_json::to_string_pretty(&map).expect("descriptions serialize")
}

pub fn brush_descriptions_json(sketch: &Sketch) -> String {
    let list: Vec<_> = sketch
        .used_brushes()
        .into_iter()
        .map(|b| json!({"color": b.color, "functionality": b.functionality}))
        .collect();
    serde_json::to_string_pretty(&list).expect("brushes serialize")
}

fn sketch_clause(ctx: &GenerationContext) -> &'static str {
    if ctx.sketch.is_some() {
        SKETCH_PRESENT
    } else {
        SKETCH_ABSENT
    }
}

pub fn add_edit(ctx: &GenerationContext) -> Result<String, RenderError> {
    let vars = Vars::new()
        .set("USER_PROMPT", &ctx.user_prompt)
        .set("AVAILABLE_TYPES", AVAILABLE_TYPES)
        .set("CURRENT_TYPE", &ctx.system_type);
    render(TemplateId::AddEdit, &vars)
}

pub fn brush_system(ctx: &GenerationContext, catalog: &Catalog) -> Result<String, RenderError> {
    let vars = Vars::new()
        .set("PARTICLE_SYSTEM_TYPE", &ctx.system_type)
        .set("PARAMETER_DETAILS", parameter_details(catalog));
    render(TemplateId::BrushSystem, &vars)
}

pub fn brush_user() -> Result<String, RenderError> {
    render(TemplateId::BrushUser, &Vars::new())
}

pub fn sketch_context(sketch: &Sketch) -> Result<String, RenderError> {
    render(
        TemplateId::SketchContext,
        &Vars::new().set("BRUSH_DESCRIPTIONS_JSON", brush_descriptions_json(sketch)),
    )
}

pub fn intent_decomposition(ctx: &GenerationContext, catalog: &Catalog) -> Result<String, RenderError> {
    let (block, brush_context, guidance) = match ctx.sketch_with_brushes() {
        Some(s) => (sketch_context(s)?, BRUSH_CONTEXT, GUIDANCE_WITH_SKETCH),
        None => (String::new(), "", GUIDANCE_WITHOUT_SKETCH),
    };
    let vars = Vars::new()
        .set("PARTICLE_SYSTEM_TYPE", &ctx.system_type)
        .set("SKETCH_CONTEXT_BLOCK", block)
        .set("USER_PROMPT", &ctx.user_prompt)
        .set("AND_SKETCH_IF_PRESENT", sketch_clause(ctx))
        .set("TECHNICAL_PARAMETERS", technical_parameters(catalog))
        .set("PARAMETER_DESCRIPTIONS_JSON", parameter_descriptions_json(catalog))
        .set("BRUSH_CONTEXT_IF_SKETCH", brush_context)
        .set("VISUAL_CONTEXT_GUIDANCE", guidance);
    render(TemplateId::IntentDecomposition, &vars)
}

/// Inputs for one concept-level request.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptPrompt<'a> {
    pub name: &'a str,
    pub description: &'a str,
    pub children: &'a [String],
    pub siblings: &'a [String],
    pub index: usize,
    pub total: usize,
}

pub fn concept_ui(ctx: &GenerationContext, c: &ConceptPrompt<'_>) -> Result<String, RenderError> {
    let siblings = if c.siblings.is_empty() {
        "none".to_string()
    } else {
        c.siblings.join(", ")
    };
    let role = format!(
        "concept {} of {} derived from the user's intent; it steers {}",
        c.index + 1,
        c.total,
        c.children.join(", ")
    );
    let vars = Vars::new()
        .set("CONCEPT_NAME", c.name)
        .set("PARTICLE_SYSTEM_TYPE", &ctx.system_type)
        .set("USER_INTENT", &ctx.user_prompt)
        .set("RELEVANCE_EXPLANATION", role)
        .set("DESCRIPTION", c.description)
        .set("SIBLING_PARAMETERS", siblings)
        .set("SCENE_INFO", scene_text(ctx))
        .set("SKETCH_INFO", sketch_text(ctx.sketch.as_ref()))
        .set("CHILD_ATTRIBUTE_NAMES", c.children.join(", "));
    render(TemplateId::ConceptUi, &vars)
}

/// One technical parameter row of an attribute request.
#[derive(Debug, Clone, PartialEq)]
pub struct TechnicalRow<'a> {
    pub name: &'a str,
    pub relevance: &'a str,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributePrompt<'a> {
    pub name: &'a str,
    pub description: &'a str,
    pub concept: &'a str,
    pub rows: Vec<TechnicalRow<'a>>,
}

pub fn attribute_ui(ctx: &GenerationContext, catalog: &Catalog, a: &AttributePrompt<'_>) -> Result<String, RenderError> {
    let position = json!({"x": ctx.position[0], "y": ctx.position[1], "z": ctx.position[2]});
    let names: Vec<&str> = a.rows.iter().map(|r| r.name).collect();
    let mut vars = Vars::new()
        .set("ATTRIBUTE_NAME", a.name)
        .set("PARTICLE_SYSTEM_TYPE", &ctx.system_type)
        .set("USER_PROMPT", &ctx.user_prompt)
        .set("CONCEPT_CONTEXT", a.concept)
        .set("ATTRIBUTE_DESCRIPTION", a.description)
        .set("SCENE_INFO", scene_text(ctx))
        .set("SKETCH_INFO", sketch_text(ctx.sketch.as_ref()))
        .set("POSITION_JSON", position.to_string())
        .set("TECH_PARAM_NAMES", names.join(", "));
    for r in &a.rows {
        let (description, min, max) = match catalog.get(r.name) {
            Some(s) => (s.description.clone(), s.min, s.max),
            None => (String::new(), f64::NAN, f64::NAN),
        };
        let row: BTreeMap<String, String> = [
            ("PARAM_NAME", r.name.to_string()),
            ("RELEVANCE", r.relevance.to_string()),
            ("DESCRIPTION", description),
            ("MIN", num(min)),
            ("MAX", num(max)),
            ("INFO_JSON", json!({"current_value": r.current}).to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        vars = vars.row(row);
    }
    render(TemplateId::AttributeUi, &vars)
}

pub fn default_value(
    ctx: &GenerationContext,
    catalog: &Catalog,
    name: &str,
    min: f64,
    max: f64,
) -> Result<String, RenderError> {
    let description = catalog.get(name).map(|s| s.description.clone()).unwrap_or_default();
    let vars = Vars::new()
        .set("PARAMETER_NAME", name)
        .set("PARTICLE_SYSTEM_TYPE", &ctx.system_type)
        .set("USER_PROMPT", &ctx.user_prompt)
        .set("DESCRIPTION", description)
        .set("MIN", num(min))
        .set("MAX", num(max))
        .set("AND_SKETCH_IF_PRESENT", sketch_clause(ctx))
        .set("SCENE_OBJECTS", scene_text(ctx));
    render(TemplateId::DefaultValue, &vars)
}
