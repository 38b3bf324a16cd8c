//! Response documents as the model returns them, and their validated forms.
//!
//! Nothing leaves this module unvalidated: every `Raw*` type has a
//! `validate` that either yields a value satisfying its invariants or an
//! error naming the offending field.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};
use steer_core::control::normalize_weights;
use steer_core::{Catalog, ParamSpec, Preset, TemplateKind, ValuePreset};
use thiserror::Error;

use crate::prompts::prompt_type_name;

/// Parameters that must appear together under one attribute.
pub const CHANNEL_GROUPS: [[&str; 3]; 4] = [
    ["color_start_red", "color_start_green", "color_start_blue"],
    ["color_end_red", "color_end_green", "color_end_blue"],
    ["position_x", "position_y", "position_z"],
    ["force_x", "force_y", "force_z"],
];

pub const PALETTE_SIZE: usize = 7;
pub const MAX_FUNCTIONALITY_WORDS: usize = 5;
pub const STEP_LABELS: std::ops::RangeInclusive<usize> = 3..=5;
pub const GROUP_PRESETS: usize = 3;
/// Share of the catalog span used to separate `min` and `max` when a
/// response collapses them.
pub const COLLAPSED_RANGE_NUDGE: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("unknown technical parameters: {}", .0.join(", "))]
    UnknownParameters(Vec<String>),
    #[error("name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("attribute `{attribute}` uses {present} without {}", .missing.join(", "))]
    ChannelGroup {
        attribute: String,
        present: String,
        missing: Vec<String>,
    },
    #[error("{0} has no entries")]
    Empty(String),
    #[error("{what}: expected {expected}, got {got}")]
    Count { what: String, expected: String, got: usize },
    #[error("{what}: keys [{}] do not match [{}]", .found.join(", "), .expected.join(", "))]
    Keys {
        what: String,
        found: Vec<String>,
        expected: Vec<String>,
    },
    #[error("particle type `{0}` is not in the template library")]
    UnknownType(String),
    #[error("icon `{0}` is not in the icon vocabulary")]
    UnknownIcon(String),
    #[error("color `{0}` is not a hex color")]
    BadColor(String),
    #[error("{0}")]
    Invalid(String),
}

fn count_error(what: impl Into<String>, expected: impl Into<String>, got: usize) -> ValidationError {
    ValidationError::Count {
        what: what.into(),
        expected: expected.into(),
        got,
    }
}

fn same_keys<'a>(what: &str, found: impl Iterator<Item = &'a String>, expected: &[String]) -> Result<(), ValidationError> {
    let found: Vec<String> = found.cloned().collect();
    let a: BTreeSet<&String> = found.iter().collect();
    let b: BTreeSet<&String> = expected.iter().collect();
    if a == b && found.len() == expected.len() {
        Ok(())
    } else {
        Err(ValidationError::Keys {
            what: what.to_string(),
            found,
            expected: expected.to_vec(),
        })
    }
}

fn finite(what: &str, x: f64) -> Result<f64, ValidationError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ValidationError::Invalid(format!("{what} is not finite")))
    }
}

fn check_labels(what: &str, labels: &[String]) -> Result<(), ValidationError> {
    if STEP_LABELS.contains(&labels.len()) {
        Ok(())
    } else {
        Err(count_error(format!("{what} sliderStepLabels"), "3 to 5", labels.len()))
    }
}

// ---------------------------------------------------------------- add/edit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDecision {
    pub should_add_particle: bool,
    #[serde(default)]
    pub particle_type: String,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddEditDecision {
    pub should_add_particle: bool,
    /// Set exactly when `should_add_particle` is.
    pub particle_type: Option<TemplateKind>,
    pub reason: String,
}

impl RawDecision {
    pub fn validate(self) -> Result<AddEditDecision, ValidationError> {
        let particle_type = if self.should_add_particle {
            let kind = self
                .particle_type
                .parse::<TemplateKind>()
                .map_err(|_| ValidationError::UnknownType(self.particle_type.clone()))?;
            Some(kind)
        } else {
            None
        };
        Ok(AddEditDecision {
            should_add_particle: self.should_add_particle,
            particle_type,
            reason: self.reason,
        })
    }
}

impl AddEditDecision {
    /// The type as it is named in prompts, or empty.
    pub fn type_name(&self) -> &'static str {
        self.particle_type.map(prompt_type_name).unwrap_or("")
    }
}

// ---------------------------------------------------------------- brushes

/// Icon names a brush may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IconVocabulary {
    names: BTreeSet<String>,
}

impl IconVocabulary {
    /// The bundled list of icon names.
    pub fn bundled() -> Self {
        Self::from_text(include_str!("../data/icons.txt"))
    }

    /// One name per line; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Self {
        IconVocabulary {
            names: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect(),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

impl Default for IconVocabulary {
    fn default() -> Self {
        Self::bundled()
    }
}

fn hex_color() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^#(?:[0-9A-Fa-f]{6}|[0-9A-Fa-f]{3})$").expect("valid pattern"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrushSpec {
    pub brushid: u32,
    pub functionality: String,
    pub color: String,
    pub icon: String,
}

impl BrushSpec {
    pub fn validate(&self, icons: &IconVocabulary) -> Result<(), ValidationError> {
        if !(1..=PALETTE_SIZE as u32).contains(&self.brushid) {
            return Err(ValidationError::Invalid(format!("brushid {} is outside 1..=7", self.brushid)));
        }
        let words = self.functionality.split_whitespace().count();
        if words == 0 || words > MAX_FUNCTIONALITY_WORDS {
            return Err(count_error(
                format!("brush {} functionality words", self.brushid),
                "1 to 5",
                words,
            ));
        }
        if !hex_color().is_match(&self.color) {
            return Err(ValidationError::BadColor(self.color.clone()));
        }
        if !icons.contains(&self.icon) {
            return Err(ValidationError::UnknownIcon(self.icon.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPalette {
    pub brushes: Vec<BrushSpec>,
}

impl RawPalette {
    /// Exactly seven valid brushes with ids 1 through 7, returned in id order.
    pub fn validate(self, icons: &IconVocabulary) -> Result<Vec<BrushSpec>, ValidationError> {
        if self.brushes.len() != PALETTE_SIZE {
            return Err(count_error("brushes", "7", self.brushes.len()));
        }
        let mut seen = HashSet::new();
        for b in &self.brushes {
            b.validate(icons)?;
            if !seen.insert(b.brushid) {
                return Err(ValidationError::DuplicateName(format!("brushid {}", b.brushid)));
            }
        }
        let mut brushes = self.brushes;
        brushes.sort_by_key(|b| b.brushid);
        Ok(brushes)
    }
}

// ---------------------------------------------------------------- hierarchy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnicalSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub technical_parameters: Vec<TechnicalSpec>,
}

impl AttributeSpec {
    pub fn technical_names(&self) -> Vec<String> {
        self.technical_parameters.iter().map(|t| t.name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub attributes: Vec<AttributeSpec>,
}

impl ConceptSpec {
    pub fn attribute_names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }
}

/// Concept → attribute → technical parameter decomposition of an intent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub panel_name: String,
    pub concepts: Vec<ConceptSpec>,
}

impl HierarchySpec {
    pub fn validate(&self, catalog: &Catalog) -> Result<(), ValidationError> {
        if self.concepts.is_empty() {
            return Err(ValidationError::Empty("concepts".into()));
        }
        let mut unknown = Vec::new();
        let mut names = HashSet::new();
        for c in &self.concepts {
            if c.attributes.is_empty() {
                return Err(ValidationError::Empty(format!("concept `{}`", c.name)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(ValidationError::DuplicateName(c.name.clone()));
            }
            for a in &c.attributes {
                if a.technical_parameters.is_empty() {
                    return Err(ValidationError::Empty(format!("attribute `{}`", a.name)));
                }
                if !names.insert(a.name.as_str()) {
                    return Err(ValidationError::DuplicateName(a.name.clone()));
                }
                for t in &a.technical_parameters {
                    if !catalog.contains(&t.name) {
                        unknown.push(t.name.clone());
                    } else if !names.insert(t.name.as_str()) {
                        return Err(ValidationError::DuplicateName(t.name.clone()));
                    }
                }
            }
        }
        if !unknown.is_empty() {
            return Err(ValidationError::UnknownParameters(unknown));
        }
        for c in &self.concepts {
            for a in &c.attributes {
                check_channel_groups(a)?;
            }
        }
        Ok(())
    }

    pub fn technical_names(&self) -> Vec<String> {
        self.concepts
            .iter()
            .flat_map(|c| c.attributes.iter())
            .flat_map(|a| a.technical_parameters.iter().map(|t| t.name.clone()))
            .collect()
    }
}

fn check_channel_groups(a: &AttributeSpec) -> Result<(), ValidationError> {
    let present: HashSet<&str> = a.technical_parameters.iter().map(|t| t.name.as_str()).collect();
    for group in CHANNEL_GROUPS {
        if let Some(first) = group.iter().find(|n| present.contains(**n)) {
            let missing: Vec<String> = group
                .iter()
                .filter(|n| !present.contains(**n))
                .map(|n| n.to_string())
                .collect();
            if !missing.is_empty() {
                return Err(ValidationError::ChannelGroup {
                    attribute: a.name.clone(),
                    present: first.to_string(),
                    missing,
                });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- UI configs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGroupOption {
    #[serde(default)]
    pub label: String,
    pub value: IndexMap<String, f64>,
}

/// Concept- or attribute-level widget configuration as returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGroupConfig {
    #[serde(default)]
    pub parameter_name: Option<String>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(rename = "sliderStepLabels", default)]
    pub slider_step_labels: Vec<String>,
    #[serde(rename = "dropDownOptions", default)]
    pub drop_down_options: Vec<RawGroupOption>,
    #[serde(rename = "childWeights", default)]
    pub child_weights: Option<IndexMap<String, f64>>,
}

/// Validated concept- or attribute-level configuration. The range is always
/// 0–100; preset coordinates are raw values in each child's own range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupUiConfig {
    pub parameter_name: String,
    pub min: f64,
    pub max: f64,
    #[serde(rename = "sliderStepLabels")]
    pub slider_step_labels: Vec<String>,
    #[serde(rename = "dropDownOptions")]
    pub drop_down_options: Vec<Preset>,
    /// Normalized weights keyed and ordered by child name.
    #[serde(rename = "childWeights")]
    pub child_weights: IndexMap<String, f64>,
}

pub type ConceptUiConfig = GroupUiConfig;

impl RawGroupConfig {
    /// `clip` maps a child name and a raw preset coordinate into that child's
    /// valid range.
    pub fn validate(
        self,
        name: &str,
        children: &[String],
        clip: &dyn Fn(&str, f64) -> f64,
    ) -> Result<GroupUiConfig, ValidationError> {
        if let Some(returned) = self.parameter_name.as_deref() {
            if returned != name {
                tracing::warn!(expected = name, returned, "config names a different control");
            }
        }
        check_labels(name, &self.slider_step_labels)?;
        if self.drop_down_options.len() != GROUP_PRESETS {
            return Err(count_error(
                format!("{name} dropDownOptions"),
                "3",
                self.drop_down_options.len(),
            ));
        }
        let mut presets = Vec::with_capacity(GROUP_PRESETS);
        for (i, opt) in self.drop_down_options.into_iter().enumerate() {
            same_keys(&format!("{name} dropDownOptions[{i}]"), opt.value.keys(), children)?;
            let mut values = IndexMap::new();
            for child in children {
                let v = finite(&format!("{name} preset value for {child}"), opt.value[child])?;
                values.insert(child.clone(), clip(child, v));
            }
            presets.push(Preset {
                label: opt.label,
                values,
            });
        }
        let raw_weights: Vec<f64> = match &self.child_weights {
            Some(w) => {
                same_keys(&format!("{name} childWeights"), w.keys(), children)?;
                children.iter().map(|c| w[c]).collect()
            }
            None => Vec::new(),
        };
        let child_weights = children
            .iter()
            .cloned()
            .zip(normalize_weights(&raw_weights, children.len()))
            .collect();
        Ok(GroupUiConfig {
            parameter_name: name.to_string(),
            min: 0.0,
            max: 100.0,
            slider_step_labels: self.slider_step_labels,
            drop_down_options: presets,
            child_weights,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawValueOption {
    #[serde(default)]
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTechnicalConfig {
    pub parameter_name: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(rename = "sliderStepLabels", default)]
    pub slider_step_labels: Vec<String>,
    #[serde(rename = "dropDownOptions", default)]
    pub drop_down_options: Vec<RawValueOption>,
}

/// Validated technical widget: `min` is the live value, `max` the goal,
/// both inside the catalog range and never equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnicalUiConfig {
    pub parameter_name: String,
    pub min: f64,
    pub max: f64,
    #[serde(rename = "sliderStepLabels")]
    pub slider_step_labels: Vec<String>,
    #[serde(rename = "dropDownOptions")]
    pub drop_down_options: Vec<ValuePreset>,
}

/// Goal value separated from `current` when a response collapses the range:
/// a tenth of the catalog span, toward whichever side has room.
pub fn separate_goal(spec: &ParamSpec, current: f64) -> f64 {
    let step = COLLAPSED_RANGE_NUDGE * (spec.max - spec.min);
    if current + step <= spec.max {
        current + step
    } else {
        current - step
    }
}

impl RawTechnicalConfig {
    pub fn validate(self, spec: &ParamSpec, current: f64) -> Result<TechnicalUiConfig, ValidationError> {
        let name = spec.name.as_str();
        let current = spec.clamp(finite(&format!("{name} current value"), current)?);
        let goal = self
            .max
            .ok_or_else(|| ValidationError::Invalid(format!("{name} has no max")))?;
        let goal = spec.clamp(finite(&format!("{name} max"), goal)?);
        if let Some(min) = self.min {
            if min != current {
                tracing::info!(parameter = name, returned = min, current, "min coerced to current value");
            }
        }
        let max = if goal == current { separate_goal(spec, current) } else { goal };
        check_labels(name, &self.slider_step_labels)?;
        let drop_down_options = self
            .drop_down_options
            .into_iter()
            .map(|o| {
                Ok(ValuePreset {
                    label: o.label,
                    value: spec.clamp(finite(&format!("{name} preset value"), o.value)?),
                })
            })
            .collect::<Result<Vec<_>, ValidationError>>()?;
        Ok(TechnicalUiConfig {
            parameter_name: name.to_string(),
            min: current,
            max,
            slider_step_labels: self.slider_step_labels,
            drop_down_options,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAttributeResponse {
    #[serde(rename = "attributeConfig")]
    pub attribute_config: RawGroupConfig,
    #[serde(rename = "technicalParameterConfigs")]
    pub technical_parameter_configs: Vec<RawTechnicalConfig>,
}

/// The part of an attribute response read when parameters are requested
/// one at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTechnicalResponse {
    #[serde(rename = "technicalParameterConfigs")]
    pub technical_parameter_configs: Vec<RawTechnicalConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeUiConfig {
    #[serde(rename = "attributeConfig")]
    pub attribute_config: GroupUiConfig,
    /// One entry per child, in child order.
    #[serde(rename = "technicalParameterConfigs")]
    pub technical_parameter_configs: Vec<TechnicalUiConfig>,
    /// Set when the combined request failed and each parameter was
    /// generated on its own.
    #[serde(default)]
    pub fallback: bool,
}

/// Technical children of an attribute with their live values.
pub fn check_current_values(
    children: &[String],
    current: &IndexMap<String, f64>,
) -> Result<(), ValidationError> {
    let missing: Vec<String> = children.iter().filter(|c| !current.contains_key(*c)).cloned().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ValidationError::Invalid(format!("no current value for {}", missing.join(", "))))
    }
}

impl RawAttributeResponse {
    pub fn validate(
        self,
        name: &str,
        children: &[String],
        catalog: &Catalog,
        current: &IndexMap<String, f64>,
    ) -> Result<AttributeUiConfig, ValidationError> {
        check_current_values(children, current)?;
        let mut by_name: IndexMap<String, RawTechnicalConfig> = IndexMap::new();
        for t in self.technical_parameter_configs {
            if !children.contains(&t.parameter_name) {
                tracing::warn!(attribute = name, parameter = %t.parameter_name, "ignoring config for a non-child");
                continue;
            }
            if by_name.contains_key(&t.parameter_name) {
                return Err(ValidationError::DuplicateName(t.parameter_name));
            }
            by_name.insert(t.parameter_name.clone(), t);
        }
        let mut technical = Vec::with_capacity(children.len());
        for child in children {
            let raw = by_name
                .shift_remove(child)
                .ok_or_else(|| ValidationError::Invalid(format!("no technical config for {child}")))?;
            let spec = catalog
                .get(child)
                .ok_or_else(|| ValidationError::UnknownParameters(vec![child.clone()]))?;
            technical.push(raw.validate(spec, current[child])?);
        }
        let clip = |child: &str, v: f64| catalog.get(child).map_or(v, |s| s.clamp(v));
        let attribute_config = self.attribute_config.validate(name, children, &clip)?;
        Ok(AttributeUiConfig {
            attribute_config,
            technical_parameter_configs: technical,
            fallback: false,
        })
    }
}

/// Attribute widget built without a model response: evenly weighted, with
/// presets at the current values, the halfway point and the goals.
pub fn synthesize_attribute_config(name: &str, technical: &[TechnicalUiConfig]) -> GroupUiConfig {
    let n = technical.len();
    let preset = |label: &str, t: f64| Preset {
        label: label.to_string(),
        values: technical
            .iter()
            .map(|c| (c.parameter_name.clone(), c.min + t * (c.max - c.min)))
            .collect(),
    };
    GroupUiConfig {
        parameter_name: name.to_string(),
        min: 0.0,
        max: 100.0,
        slider_step_labels: vec!["current".into(), "halfway".into(), "goal".into()],
        drop_down_options: vec![preset("Current", 0.0), preset("Halfway", 0.5), preset("Goal", 1.0)],
        child_weights: technical
            .iter()
            .map(|c| c.parameter_name.clone())
            .zip(normalize_weights::<f64>(&[], n))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDefault {
    #[serde(rename = "defaultValue")]
    pub default_value: f64,
}

/// `value` if it lies between `min` and `max` (in either order), otherwise
/// the midpoint.
pub fn default_or_midpoint(value: Option<f64>, min: f64, max: f64) -> f64 {
    let (lo, hi) = (min.min(max), min.max(max));
    match value {
        Some(v) if v.is_finite() && v >= lo && v <= hi => v,
        _ => (min + max) / 2.0,
    }
}
