//! Three-level synchronized control hierarchy.
//!
//! Concepts own attributes, attributes own technical parameters. Every node
//! holds a normalized value in `[0, 1]` over its own [`ControlRange`]; the
//! synchronization math in [`sync`] works purely on those normalized values,
//! so an inverted range (min > max) is just a reparameterization.

mod sync;

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::scalar::{clamp, Real};

pub use sync::{
    normalize_weights, NodeChange, SyncEvent, DEGENERATE_CURRENT, MAX_REDISTRIBUTION_ITERATIONS,
    REDISTRIBUTION_TOLERANCE,
};

pub const PANEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("range is degenerate (min == max == {0})")]
    DegenerateRange(f64),
    #[error("range bounds must be finite")]
    NonFiniteRange,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is locked")]
    Locked(String),
    #[error("node `{node}` has no preset `{label}`")]
    UnknownPreset { node: String, label: String },
    #[error("node `{0}` has no children")]
    NoChildren(String),
    #[error("invalid tree structure: {0}")]
    Structure(String),
    #[error("panel document version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("malformed panel document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Concept,
    Attribute,
    Technical,
}

impl Level {
    pub fn child_level(self) -> Option<Level> {
        match self {
            Level::Concept => Some(Level::Attribute),
            Level::Attribute => Some(Level::Technical),
            Level::Technical => None,
        }
    }
}

/// Display range of a control. For technical nodes `min` is the live value
/// when the panel was generated and `max` the goal; `min > max` is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRange<S> {
    pub min: S,
    pub max: S,
}

impl<S: Real> ControlRange<S> {
    pub fn new(min: S, max: S) -> Result<Self, ControlError> {
        let r = ControlRange { min, max };
        r.check()?;
        Ok(r)
    }

    /// The 0–100 convention used for concepts and attributes.
    pub fn percent() -> Self {
        ControlRange {
            min: S::zero(),
            max: S::lit(100.0),
        }
    }

    pub fn check(&self) -> Result<(), ControlError> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(ControlError::NonFiniteRange);
        }
        if self.min == self.max {
            return Err(ControlError::DegenerateRange(self.min.to_f64_lossy()));
        }
        Ok(())
    }

    pub fn is_inverted(&self) -> bool {
        self.min > self.max
    }

    /// `(raw − min) / (max − min)` clamped to `[0, 1]`.
    pub fn normalize(&self, raw: S) -> Result<S, ControlError> {
        self.check()?;
        Ok(clamp((raw - self.min) / (self.max - self.min), S::zero(), S::one()))
    }

    pub fn denormalize(&self, normalized: S) -> S {
        self.min + normalized * (self.max - self.min)
    }

    pub fn lower(&self) -> S {
        self.min.min(self.max)
    }

    pub fn upper(&self) -> S {
        self.min.max(self.max)
    }
}

/// Normalizes `raw` into `range`; errors on a degenerate range.
pub fn normalize<S: Real>(range: &ControlRange<S>, raw: S) -> Result<S, ControlError> {
    range.normalize(raw)
}

/// Dropdown entry of a concept or attribute: raw coordinates for each child,
/// expressed in the child's own range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset<S> {
    pub label: String,
    pub values: IndexMap<String, S>,
}

/// Dropdown entry of a technical node: a single raw value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuePreset<S> {
    pub label: String,
    pub value: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct ControlNode<S> {
    pub id: String,
    pub name: String,
    pub level: Level,
    #[serde(default)]
    pub description: String,
    pub range: ControlRange<S>,
    /// Normalized value in `[0, 1]`.
    pub value: S,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default)]
    pub children: Vec<String>,
    #[serde(default)]
    pub child_weights: IndexMap<String, S>,
    #[serde(default)]
    pub step_labels: Vec<String>,
    #[serde(default)]
    pub dropdown_presets: Vec<Preset<S>>,
    #[serde(default)]
    pub value_presets: Vec<ValuePreset<S>>,
    #[serde(default)]
    pub locked: bool,
    #[serde(skip)]
    pub interacting: bool,
}

impl<S: Real> ControlNode<S> {
    pub fn new(id: impl Into<String>, level: Level, range: ControlRange<S>) -> Self {
        let id = id.into();
        ControlNode {
            name: id.clone(),
            id,
            level,
            description: String::new(),
            range,
            value: S::zero(),
            parent: None,
            children: Vec::new(),
            child_weights: IndexMap::new(),
            step_labels: Vec::new(),
            dropdown_presets: Vec::new(),
            value_presets: Vec::new(),
            locked: false,
            interacting: false,
        }
    }

    pub fn with_value(mut self, normalized: S) -> Self {
        self.value = clamp(normalized, S::zero(), S::one());
        self
    }

    pub fn raw_value(&self) -> S {
        self.range.denormalize(self.value)
    }

    /// Writes are refused for locked nodes and for the node being dragged.
    pub fn is_frozen(&self) -> bool {
        self.locked || self.interacting
    }

    /// Normalized weight of `child`, falling back to `1/n`.
    pub fn weight_of(&self, child: &str) -> S {
        let weights = self.normalized_weights();
        self.children
            .iter()
            .position(|c| c == child)
            .map(|i| weights[i])
            .unwrap_or_else(S::zero)
    }

    /// Weights aligned with `children`, normalized to sum to one.
    pub fn normalized_weights(&self) -> Vec<S> {
        let raw: Vec<S> = if self.child_weights.is_empty() {
            Vec::new()
        } else {
            self.children
                .iter()
                .map(|c| self.child_weights.get(c).copied().unwrap_or_else(S::zero))
                .collect()
        };
        normalize_weights(&raw, self.children.len())
    }
}

/// A generated control panel: the node tree plus bindings of technical
/// nodes to catalog parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct PanelConfig<S> {
    pub format_version: u32,
    pub panel_name: String,
    /// Particle system type the panel was generated for.
    pub system_type: String,
    pub roots: Vec<String>,
    pub nodes: IndexMap<String, ControlNode<S>>,
    pub bindings: IndexMap<String, String>,
}

impl<S: Real> PanelConfig<S> {
    pub fn new(panel_name: impl Into<String>, system_type: impl Into<String>) -> Self {
        PanelConfig {
            format_version: PANEL_FORMAT_VERSION,
            panel_name: panel_name.into(),
            system_type: system_type.into(),
            roots: Vec::new(),
            nodes: IndexMap::new(),
            bindings: IndexMap::new(),
        }
    }

    pub fn node(&self, id: &str) -> Result<&ControlNode<S>, ControlError> {
        self.nodes
            .get(id)
            .ok_or_else(|| ControlError::UnknownNode(id.to_string()))
    }

    pub(crate) fn node_mut(&mut self, id: &str) -> Result<&mut ControlNode<S>, ControlError> {
        self.nodes
            .get_mut(id)
            .ok_or_else(|| ControlError::UnknownNode(id.to_string()))
    }

    pub fn value(&self, id: &str) -> Result<S, ControlError> {
        Ok(self.node(id)?.value)
    }

    pub fn raw_value(&self, id: &str) -> Result<S, ControlError> {
        Ok(self.node(id)?.raw_value())
    }

    pub fn add_root(&mut self, node: ControlNode<S>) -> Result<(), ControlError> {
        if node.level != Level::Concept {
            return Err(ControlError::Structure(format!(
                "root `{}` must be a concept",
                node.id
            )));
        }
        let id = node.id.clone();
        self.insert(node)?;
        self.roots.push(id);
        Ok(())
    }

    /// Attaches `node` under `parent` with a raw weight. Call
    /// [`finalize`](Self::finalize) once the tree is built to normalize weights.
    pub fn add_child(&mut self, parent: &str, mut node: ControlNode<S>, weight: S) -> Result<(), ControlError> {
        let parent_level = self.node(parent)?.level;
        if parent_level.child_level() != Some(node.level) {
            return Err(ControlError::Structure(format!(
                "{:?} `{}` cannot be a child of {:?} `{parent}`",
                node.level, node.id, parent_level
            )));
        }
        node.parent = Some(parent.to_string());
        let id = node.id.clone();
        self.insert(node)?;
        let p = self.node_mut(parent)?;
        p.children.push(id.clone());
        p.child_weights.insert(id, weight);
        Ok(())
    }

    /// Normalizes every weight map and recomputes parents bottom-up.
    pub fn finalize(&mut self) -> Result<(), ControlError> {
        for node in self.nodes.values_mut() {
            if node.children.is_empty() {
                continue;
            }
            let normalized = node.normalized_weights();
            node.child_weights = node.children.iter().cloned().zip(normalized).collect();
        }
        self.refresh_aggregates()
    }

    fn insert(&mut self, node: ControlNode<S>) -> Result<(), ControlError> {
        node.range.check()?;
        if self.nodes.contains_key(&node.id) {
            return Err(ControlError::Structure(format!("duplicate node id `{}`", node.id)));
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    /// Replaces the weights of `parent`; they are normalized (1/n fallback).
    pub fn set_child_weights(&mut self, parent: &str, weights: &[S]) -> Result<(), ControlError> {
        let p = self.node_mut(parent)?;
        if !weights.is_empty() && weights.len() != p.children.len() {
            return Err(ControlError::Structure(format!(
                "`{parent}` has {} children but {} weights were given",
                p.children.len(),
                weights.len()
            )));
        }
        let normalized = normalize_weights(weights, p.children.len());
        p.child_weights = p.children.iter().cloned().zip(normalized).collect();
        Ok(())
    }

    pub fn bind(&mut self, technical: &str, parameter: impl Into<String>) -> Result<(), ControlError> {
        if self.node(technical)?.level != Level::Technical {
            return Err(ControlError::Structure(format!(
                "only technical nodes can be bound, `{technical}` is not one"
            )));
        }
        self.bindings.insert(technical.to_string(), parameter.into());
        Ok(())
    }

    pub fn parent_of(&self, id: &str) -> Option<&str> {
        self.nodes.get(id)?.parent.as_deref()
    }

    /// Ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = self.parent_of(id);
        while let Some(p) = cur {
            out.push(p.to_string());
            cur = self.parent_of(p);
        }
        out
    }

    /// Weighted mean of `id` from its children's current values, without writing.
    pub fn weighted_mean(&self, id: &str) -> Result<S, ControlError> {
        let node = self.node(id)?;
        if node.children.is_empty() {
            return Err(ControlError::NoChildren(id.to_string()));
        }
        let weights = node.normalized_weights();
        let mut num = S::zero();
        let mut den = S::zero();
        for (c, w) in node.children.iter().zip(weights) {
            num = num + w * self.node(c)?.value;
            den = den + w;
        }
        Ok(num / den)
    }

    /// Recomputes every non-leaf node bottom-up from its children.
    pub fn refresh_aggregates(&mut self) -> Result<(), ControlError> {
        for root in self.roots.clone() {
            self.refresh_subtree(&root)?;
        }
        Ok(())
    }

    fn refresh_subtree(&mut self, id: &str) -> Result<(), ControlError> {
        let children = self.node(id)?.children.clone();
        if children.is_empty() {
            return Ok(());
        }
        for c in &children {
            self.refresh_subtree(c)?;
        }
        let v = self.weighted_mean(id)?;
        self.node_mut(id)?.value = v;
        Ok(())
    }

    /// Technical node bound to catalog parameter `param`.
    pub fn node_for_parameter(&self, param: &str) -> Option<&str> {
        self.bindings
            .iter()
            .find(|(_, p)| p.as_str() == param)
            .map(|(n, _)| n.as_str())
    }

    /// Raw values of bound technical nodes, in node order.
    pub fn technical_values(&self) -> Vec<(String, S)> {
        self.nodes
            .values()
            .filter(|n| n.level == Level::Technical)
            .filter_map(|n| {
                self.bindings
                    .get(&n.id)
                    .map(|param| (param.clone(), n.raw_value()))
            })
            .collect()
    }

    /// Structural and numeric invariants that hold for any tree, generated or not.
    pub fn check_structure(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for root in &self.roots {
            match self.nodes.get(root) {
                Some(n) if n.level == Level::Concept && n.parent.is_none() => {}
                Some(_) => problems.push(format!("root `{root}` is not a parentless concept")),
                None => problems.push(format!("root `{root}` does not exist")),
            }
        }
        for node in self.nodes.values() {
            if !(node.value >= S::zero() && node.value <= S::one()) {
                problems.push(format!("`{}` value {} outside [0,1]", node.id, node.value));
            }
            if let Err(e) = node.range.check() {
                problems.push(format!("`{}`: {e}", node.id));
            }
            if node.level == Level::Technical && !node.children.is_empty() {
                problems.push(format!("technical node `{}` has children", node.id));
            }
            if node.level != Level::Technical && node.children.is_empty() {
                problems.push(format!("{:?} `{}` has no children", node.level, node.id));
            }
            if node.level != Level::Concept && node.parent.is_none() {
                problems.push(format!("`{}` has no parent", node.id));
            }
            for c in &node.children {
                match self.nodes.get(c) {
                    Some(child) => {
                        if Some(child.level) != node.level.child_level() {
                            problems.push(format!("`{c}` is at the wrong level under `{}`", node.id));
                        }
                        if child.parent.as_deref() != Some(node.id.as_str()) {
                            problems.push(format!("`{c}` does not point back to `{}`", node.id));
                        }
                    }
                    None => problems.push(format!("`{}` references missing child `{c}`", node.id)),
                }
            }
            if !node.child_weights.is_empty() {
                let keys: HashSet<&String> = node.child_weights.keys().collect();
                let kids: HashSet<&String> = node.children.iter().collect();
                if keys != kids {
                    problems.push(format!("`{}` weight keys differ from its children", node.id));
                }
                let sum = node
                    .child_weights
                    .values()
                    .fold(0.0, |acc, w| acc + w.to_f64_lossy());
                if (sum - 1.0).abs() > 1e-9 {
                    problems.push(format!("`{}` weights sum to {sum}", node.id));
                }
                if node.child_weights.values().any(|w| *w < S::zero()) {
                    problems.push(format!("`{}` has a negative weight", node.id));
                }
            }
            for preset in &node.dropdown_presets {
                for key in preset.values.keys() {
                    if !node.children.contains(key) {
                        problems.push(format!(
                            "preset `{}` of `{}` references unknown child `{key}`",
                            preset.label, node.id
                        ));
                    }
                }
            }
        }
        problems
    }

    /// Everything in [`check_structure`](Self::check_structure) plus the
    /// rules a generated panel must satisfy against `catalog`.
    pub fn check_invariants(&self, catalog: &Catalog) -> Vec<String> {
        let mut problems = self.check_structure();
        let mut names = HashSet::new();
        for node in self.nodes.values() {
            if !names.insert(node.name.as_str()) {
                problems.push(format!("duplicate node name `{}`", node.name));
            }
            if !(3..=5).contains(&node.step_labels.len()) {
                problems.push(format!(
                    "`{}` has {} step labels",
                    node.id,
                    node.step_labels.len()
                ));
            }
            if node.level == Level::Technical {
                match self.bindings.get(&node.id).and_then(|p| catalog.get(p)) {
                    Some(spec) => {
                        for bound in [node.range.min, node.range.max] {
                            if !spec.contains(bound.to_f64_lossy()) {
                                problems.push(format!(
                                    "`{}` range bound {bound} outside catalog [{}, {}]",
                                    node.id, spec.min, spec.max
                                ));
                            }
                        }
                    }
                    None => problems.push(format!("technical `{}` is not bound to a catalog parameter", node.id)),
                }
            }
        }
        for (node, _) in &self.bindings {
            if self.nodes.get(node).map(|n| n.level) != Some(Level::Technical) {
                problems.push(format!("binding for `{node}` does not target a technical node"));
            }
        }
        problems
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("panel serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ControlError> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header =
            serde_json::from_str(text).map_err(|e| ControlError::Malformed(e.to_string()))?;
        if header.format_version != PANEL_FORMAT_VERSION {
            return Err(ControlError::Version {
                found: header.format_version,
                expected: PANEL_FORMAT_VERSION,
            });
        }
        let panel: PanelConfig<S> =
            serde_json::from_str(text).map_err(|e| ControlError::Malformed(e.to_string()))?;
        let problems = panel.check_structure();
        if !problems.is_empty() {
            return Err(ControlError::Malformed(problems.join("; ")));
        }
        Ok(panel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        let r = ControlRange::new(0.0, 180.0).unwrap();
        assert_eq!(r.normalize(90.0).unwrap(), 0.5);
        assert_eq!(r.normalize(200.0).unwrap(), 1.0);
        let inv = ControlRange::new(100.0, 20.0).unwrap();
        assert!(inv.is_inverted());
        assert_eq!(inv.normalize(60.0).unwrap(), 0.5);
        assert_eq!(inv.denormalize(0.5), 60.0);
        let bad = ControlRange { min: 3.0, max: 3.0 };
        assert_eq!(normalize(&bad, 1.0), Err(ControlError::DegenerateRange(3.0)));
        assert!(ControlRange::new(f64::NAN, 1.0).is_err());
    }

    fn small_tree() -> PanelConfig<f64> {
        let mut p = PanelConfig::new("Test", "fountain");
        p.add_root(ControlNode::new("c", Level::Concept, ControlRange::percent())).unwrap();
        p.add_child("c", ControlNode::new("a", Level::Attribute, ControlRange::percent()), 1.0)
            .unwrap();
        p.add_child(
            "a",
            ControlNode::new("t", Level::Technical, ControlRange::new(0.0, 180.0).unwrap()),
            1.0,
        )
        .unwrap();
        p.bind("t", "velocity_theta").unwrap();
        p.finalize().unwrap();
        p
    }

    #[test]
    fn structure_is_enforced() {
        let mut p = small_tree();
        assert!(p.check_structure().is_empty(), "{:?}", p.check_structure());
        let err = p.add_child("c", ControlNode::new("x", Level::Technical, ControlRange::percent()), 1.0);
        assert!(matches!(err, Err(ControlError::Structure(_))));
        assert!(p.bind("a", "force_x").is_err());
        assert!(p.add_root(ControlNode::new("c", Level::Concept, ControlRange::percent())).is_err());
    }

    #[test]
    fn generated_rules_flag_missing_labels() {
        let p = small_tree();
        let problems = p.check_invariants(&Catalog::bundled());
        assert!(problems.iter().any(|m| m.contains("step labels")));
    }

    #[test]
    fn panel_round_trip_and_version() {
        let mut p = small_tree();
        p.node_mut("t").unwrap().locked = true;
        p.node_mut("t").unwrap().value = 0.123456789012345;
        let text = p.to_json();
        let back = PanelConfig::<f64>::from_json(&text).unwrap();
        assert_eq!(back, p);
        let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 9", 1);
        assert!(matches!(
            PanelConfig::<f64>::from_json(&bumped),
            Err(ControlError::Version { found: 9, .. })
        ));
        assert!(matches!(
            PanelConfig::<f64>::from_json("{"),
            Err(ControlError::Malformed(_))
        ));
    }
}
