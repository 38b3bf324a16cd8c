//! Everything a generation call may draw on.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use steer_core::{Catalog, SystemState};

use crate::provider::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub position: [f64; 3],
}

/// Color and functionality of a brush the user drew with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrushDescriptor {
    pub color: String,
    pub functionality: String,
}

/// A polyline in normalized screen coordinates. `brush` is `None` for
/// plain annotation strokes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    #[serde(default)]
    pub brush: Option<u32>,
    pub points: Vec<[f64; 2]>,
}

/// Sketch overlay with the brushes it used, already resolved against the
/// palette.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    pub strokes: Vec<Stroke>,
    #[serde(default)]
    pub brushes: IndexMap<u32, BrushDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay: Option<Image>,
}

impl Sketch {
    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    /// Descriptors of brushes that appear on at least one stroke, in first-use order.
    pub fn used_brushes(&self) -> Vec<&BrushDescriptor> {
        let mut seen = Vec::new();
        for s in &self.strokes {
            if let Some(id) = s.brush {
                if !seen.contains(&id) {
                    seen.push(id);
                }
            }
        }
        seen.iter().filter_map(|id| self.brushes.get(id)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationContext {
    /// Template kind as it appears in prompts, e.g. `fire`.
    pub system_type: String,
    pub user_prompt: String,
    pub scene: Vec<SceneObject>,
    pub screenshot: Option<Image>,
    pub sketch: Option<Sketch>,
    /// Live parameter values of the first emitter.
    pub current_values: IndexMap<String, f64>,
    /// Emitter origin.
    pub position: [f64; 3],
}

impl GenerationContext {
    /// Reads the current values from the running system.
    pub fn from_state(state: &SystemState, catalog: &Catalog, user_prompt: impl Into<String>) -> Self {
        let position = state
            .emitters
            .first()
            .map(|e| e.position)
            .unwrap_or([0.0; 3]);
        GenerationContext {
            system_type: crate::prompts::prompt_type_name(state.template_kind).to_string(),
            user_prompt: user_prompt.into(),
            scene: Vec::new(),
            screenshot: None,
            sketch: None,
            current_values: state.current_values(catalog),
            position,
        }
    }

    pub fn with_scene(mut self, scene: Vec<SceneObject>) -> Self {
        self.scene = scene;
        self
    }

    pub fn with_sketch(mut self, sketch: Option<Sketch>) -> Self {
        self.sketch = sketch.filter(|s| !s.is_empty());
        self
    }

    pub fn with_screenshot(mut self, image: Option<Image>) -> Self {
        self.screenshot = image;
        self
    }

    /// The sketch, if at least one stroke was drawn with a palette brush.
    pub fn sketch_with_brushes(&self) -> Option<&Sketch> {
        self.sketch.as_ref().filter(|s| !s.used_brushes().is_empty())
    }

    /// Scene screenshot followed by the sketch overlay, where present.
    pub fn images(&self) -> Vec<Image> {
        let mut out: Vec<Image> = self.screenshot.iter().cloned().collect();
        if let Some(o) = self.sketch.as_ref().and_then(|s| s.overlay.clone()) {
            out.push(o);
        }
        out
    }
}
