//! Prompt templates with `[SLOT]` markers.
//!
//! Slots are upper-case identifiers in square brackets. A line reading
//! `[FOR EACH PARAMETER:]` marks the following line as a row that is
//! repeated once per entry of [`Vars::rows`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

const REPEAT_MARKER: &str = "[FOR EACH PARAMETER:]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    AddEdit,
    BrushSystem,
    BrushUser,
    IntentDecomposition,
    SketchContext,
    ConceptUi,
    AttributeUi,
    DefaultValue,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::AddEdit,
        TemplateId::BrushSystem,
        TemplateId::BrushUser,
        TemplateId::IntentDecomposition,
        TemplateId::SketchContext,
        TemplateId::ConceptUi,
        TemplateId::AttributeUi,
        TemplateId::DefaultValue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::AddEdit => "add_edit",
            TemplateId::BrushSystem => "brush_system",
            TemplateId::BrushUser => "brush_user",
            TemplateId::IntentDecomposition => "intent_decomposition",
            TemplateId::SketchContext => "sketch_context",
            TemplateId::ConceptUi => "concept_ui",
            TemplateId::AttributeUi => "attribute_ui",
            TemplateId::DefaultValue => "default_value",
        }
    }

    /// Bundled template body.
    pub fn body(self) -> &'static str {
        match self {
            TemplateId::AddEdit => include_str!("../templates/add_edit.txt"),
            TemplateId::BrushSystem => include_str!("../templates/brush_system.txt"),
            TemplateId::BrushUser => include_str!("../templates/brush_user.txt"),
            TemplateId::IntentDecomposition => include_str!("../templates/intent_decomposition.txt"),
            TemplateId::SketchContext => include_str!("../templates/sketch_context.txt"),
            TemplateId::ConceptUi => include_str!("../templates/concept_ui.txt"),
            TemplateId::AttributeUi => include_str!("../templates/attribute_ui.txt"),
            TemplateId::DefaultValue => include_str!("../templates/default_value.txt"),
        }
    }

    /// Distinct slot names in order of first appearance, rows included.
    pub fn slots(self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for m in slot_pattern().find_iter(self.body()) {
            let name = &m.as_str()[1..m.as_str().len() - 1];
            if !out.iter().any(|s| s == name) {
                out.push(name.to_string());
            }
        }
        out
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("template `{template}` has no value for slot [{slot}]")]
    MissingSlot { template: TemplateId, slot: String },
}

pub(crate) fn slot_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"\[([A-Z][A-Z0-9_]*)\]").expect("valid slot pattern"))
}

/// Slot values for one rendering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vars {
    pub values: BTreeMap<String, String>,
    /// Per-row values for the repeated line; a row value shadows `values`.
    pub rows: Vec<BTreeMap<String, String>>,
}

impl Vars {
    pub fn new() -> Self {
        Vars::default()
    }

    pub fn set(mut self, slot: &str, value: impl Into<String>) -> Self {
        self.values.insert(slot.to_string(), value.into());
        self
    }

    pub fn row(mut self, row: BTreeMap<String, String>) -> Self {
        self.rows.push(row);
        self
    }
}

/// Substitutes every slot of `id`. Substituted text is not scanned again.
pub fn render(id: TemplateId, vars: &Vars) -> Result<String, RenderError> {
    let body = id.body();
    let empty = BTreeMap::new();
    let mut out = String::with_capacity(body.len() * 2);
    let mut lines = body.split('\n').peekable();
    let mut first = true;
    let mut push_line = |out: &mut String, line: &str| {
        if !std::mem::take(&mut first) {
            out.push('\n');
        }
        out.push_str(line);
    };
    while let Some(line) = lines.next() {
        if line == REPEAT_MARKER {
            let Some(row_line) = lines.next() else { break };
            for row in &vars.rows {
                let rendered = substitute(id, row_line, row, &vars.values)?;
                push_line(&mut out, &rendered);
            }
            continue;
        }
        let rendered = substitute(id, line, &empty, &vars.values)?;
        push_line(&mut out, &rendered);
    }
    Ok(out)
}

fn substitute(
    id: TemplateId,
    line: &str,
    row: &BTreeMap<String, String>,
    values: &BTreeMap<String, String>,
) -> Result<String, RenderError> {
    let mut out = String::with_capacity(line.len());
    let mut last = 0;
    for caps in slot_pattern().captures_iter(line) {
        let whole = caps.get(0).expect("match");
        let name = &caps[1];
        let value = row
            .get(name)
            .or_else(|| values.get(name))
            .ok_or_else(|| RenderError::MissingSlot {
                template: id,
                slot: name.to_string(),
            })?;
        out.push_str(&line[last..whole.start()]);
        out.push_str(value);
        last = whole.end();
    }
    out.push_str(&line[last..]);
    Ok(out)
}
