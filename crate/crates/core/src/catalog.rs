//! Technical parameter vocabulary of the particle engine.
//!
//! A [`Catalog`] is loaded from a JSON document holding one record per
//! parameter (`name`, `description`, `min`, `max`, `default`,
//! `path_template`). Every range check in the workspace goes through it.

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Placeholder substituted with the emitter index when resolving a path.
pub const EMITTER_INDEX_PLACEHOLDER: &str = "{emitterIndex}";

/// Prefix of path templates that address a group of engine fields rather
/// than a single emitter field.
pub const GROUP_PREFIX: &str = "__group_";

const BUNDLED_CATALOG: &str = include_str!("../data/catalog.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("catalog document is malformed: {0}")]
    Malformed(String),
    #[error("catalog entry {index} ({name}) is malformed: {message}")]
    MalformedEntry {
        index: usize,
        name: String,
        message: String,
    },
    #[error("catalog has no parameters")]
    Empty,
    #[error("duplicate parameter name `{0}`")]
    Duplicate(String),
    #[error("parameter `{name}` has invalid range [{min}, {max}]")]
    InvalidRange { name: String, min: f64, max: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("failed to read catalog: {0}")]
    Io(String),
}

/// Description, range, default and engine path of one technical parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub description: String,
    pub min: f64,
    pub max: f64,
    pub default: f64,
    pub path_template: String,
}

impl ParamSpec {
    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    pub fn clamp(&self, value: f64) -> f64 {
        if value.is_nan() {
            return self.min;
        }
        value.max(self.min).min(self.max)
    }

    pub fn is_group(&self) -> bool {
        self.path_template.starts_with(GROUP_PREFIX)
    }
}

/// A resolved engine path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamPath {
    /// A field of one emitter, e.g. `emitters[0].behaviours[force].force.x`.
    Emitter { index: usize, path: String },
    /// A group sentinel such as `__group_position_x`.
    Group { sentinel: String },
}

impl ParamPath {
    pub fn as_str(&self) -> &str {
        match self {
            ParamPath::Emitter { path, .. } => path,
            ParamPath::Group { sentinel } => sentinel,
        }
    }

    /// Field part of an emitter path, with the `emitters[N].` prefix removed.
    pub fn field(&self) -> &str {
        match self {
            ParamPath::Emitter { path, .. } => match path.find("].") {
                Some(i) if path.starts_with("emitters[") => &path[i + 2..],
                _ => path,
            },
            ParamPath::Group { sentinel } => sentinel,
        }
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of [`Catalog::validate_assignment`] when the assignment is rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    UnknownParameter { name: String },
    NotFinite { name: String },
    BelowMin { name: String, value: f64, min: f64 },
    AboveMax { name: String, value: f64, max: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownParameter { name } => write!(f, "unknown parameter `{name}`"),
            Violation::NotFinite { name } => write!(f, "value for `{name}` is not finite"),
            Violation::BelowMin { name, value, min } => {
                write!(f, "`{name}` = {value} is below the minimum {min}")
            }
            Violation::AboveMax { name, value, max } => {
                write!(f, "`{name}` = {value} is above the maximum {max}")
            }
        }
    }
}

impl std::error::Error for Violation {}

#[derive(Deserialize)]
struct RawDocument {
    #[serde(default)]
    version: Option<String>,
    parameters: Vec<serde_json::Value>,
}

/// Ordered, immutable set of [`ParamSpec`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    version: String,
    specs: IndexMap<String, ParamSpec>,
}

impl Catalog {
    /// The catalog shipped with the crate.
    pub fn bundled() -> Catalog {
        Catalog::from_json_str(BUNDLED_CATALOG).expect("bundled catalog is valid")
    }

    /// Raw text of the bundled catalog document.
    pub fn bundled_document() -> &'static str {
        BUNDLED_CATALOG
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CatalogError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Catalog::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Catalog, CatalogError> {
        if text.trim().is_empty() {
            return Err(CatalogError::Empty);
        }
        let raw: RawDocument =
            serde_json::from_str(text).map_err(|e| CatalogError::Malformed(e.to_string()))?;
        if raw.parameters.is_empty() {
            return Err(CatalogError::Empty);
        }

        let mut specs = IndexMap::with_capacity(raw.parameters.len());
        for (index, entry) in raw.parameters.into_iter().enumerate() {
            let name = entry
                .get("name")
                .and_then(|n| n.as_str())
                .unwrap_or("<unnamed>")
                .to_string();
            let mut spec: ParamSpec =
                serde_json::from_value(entry).map_err(|e| CatalogError::MalformedEntry {
                    index,
                    name: name.clone(),
                    message: e.to_string(),
                })?;
            if !(spec.min.is_finite() && spec.max.is_finite() && spec.min < spec.max) {
                return Err(CatalogError::InvalidRange {
                    name: spec.name,
                    min: spec.min,
                    max: spec.max,
                });
            }
            // Some published defaults sit outside their range (alpha_end: 0 with min 0.1).
            spec.default = spec.clamp(spec.default);
            if specs.contains_key(&spec.name) {
                return Err(CatalogError::Duplicate(spec.name));
            }
            specs.insert(spec.name.clone(), spec);
        }

        Ok(Catalog {
            version: raw.version.unwrap_or_else(|| "unversioned".to_string()),
            specs,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.specs.get(name)
    }

    pub fn spec(&self, name: &str) -> Result<&ParamSpec, CatalogError> {
        self.get(name)
            .ok_or_else(|| CatalogError::UnknownParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.specs.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamSpec> {
        self.specs.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.keys().map(String::as_str)
    }

    pub fn clamp_to_range(&self, name: &str, value: f64) -> Result<f64, CatalogError> {
        Ok(self.spec(name)?.clamp(value))
    }

    pub fn resolve_path(&self, name: &str, emitter_index: usize) -> Result<ParamPath, CatalogError> {
        let spec = self.spec(name)?;
        if spec.is_group() {
            return Ok(ParamPath::Group {
                sentinel: spec.path_template.clone(),
            });
        }
        let path = spec
            .path_template
            .replace(EMITTER_INDEX_PLACEHOLDER, &emitter_index.to_string());
        Ok(ParamPath::Emitter {
            index: emitter_index,
            path,
        })
    }

    pub fn validate_assignment(&self, name: &str, value: f64) -> Result<(), Violation> {
        let Some(spec) = self.get(name) else {
            return Err(Violation::UnknownParameter {
                name: name.to_string(),
            });
        };
        if !value.is_finite() {
            return Err(Violation::NotFinite {
                name: name.to_string(),
            });
        }
        if value < spec.min {
            return Err(Violation::BelowMin {
                name: name.to_string(),
                value,
                min: spec.min,
            });
        }
        if value > spec.max {
            return Err(Violation::AboveMax {
                name: name.to_string(),
                value,
                max: spec.max,
            });
        }
        Ok(())
    }

    /// Serializes the catalog back into the document format.
    pub fn to_json_string(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            version: &'a str,
            parameters: Vec<&'a ParamSpec>,
        }
        serde_json::to_string_pretty(&Doc {
            version: &self.version,
            parameters: self.specs.values().collect(),
        })
        .expect("catalog serializes")
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::bundled()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_velocity_theta() {
        let c = Catalog::bundled();
        let s = c.spec("velocity_theta").unwrap();
        assert_eq!((s.min, s.max, s.default), (0.0, 180.0, 0.0));
        let s = c.spec("alpha_start").unwrap();
        assert_eq!((s.min, s.max, s.default), (0.1, 1.0, 1.0));
        assert_eq!(c.len(), 22);
    }

    #[test]
    fn out_of_range_default_is_clamped() {
        let c = Catalog::bundled();
        assert_eq!(c.spec("alpha_end").unwrap().default, 0.1);
        for s in c.iter() {
            assert!(s.min < s.max);
            assert!(s.contains(s.default), "{}", s.name);
        }
    }

    #[test]
    fn particles_count_has_description() {
        let c = Catalog::bundled();
        assert_eq!(
            c.spec("particles_count").unwrap().description,
            "particles emitted per emission event"
        );
    }

    #[test]
    fn empty_documents_are_rejected() {
        assert_eq!(Catalog::from_json_str(""), Err(CatalogError::Empty));
        assert_eq!(
            Catalog::from_json_str(r#"{"parameters": []}"#),
            Err(CatalogError::Empty)
        );
        assert!(matches!(
            Catalog::from_json_str("{not json"),
            Err(CatalogError::Malformed(_))
        ));
    }

    #[test]
    fn duplicate_and_malformed_entries() {
        let dup = r#"{"parameters": [
            {"name": "a", "description": "", "min": 0, "max": 1, "default": 0, "path_template": "x"},
            {"name": "a", "description": "", "min": 0, "max": 1, "default": 0, "path_template": "x"}
        ]}"#;
        assert_eq!(
            Catalog::from_json_str(dup),
            Err(CatalogError::Duplicate("a".into()))
        );

        let bad = r#"{"parameters": [
            {"name": "a", "description": "", "min": 0, "max": 1, "default": 0, "path_template": "x"},
            {"name": "b", "description": "", "min": "zero", "max": 1, "default": 0, "path_template": "x"}
        ]}"#;
        match Catalog::from_json_str(bad) {
            Err(CatalogError::MalformedEntry { index, name, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(name, "b");
            }
            other => panic!("unexpected {other:?}"),
        }

        let inverted = r#"{"parameters": [
            {"name": "a", "description": "", "min": 2, "max": 1, "default": 0, "path_template": "x"}
        ]}"#;
        assert!(matches!(
            Catalog::from_json_str(inverted),
            Err(CatalogError::InvalidRange { .. })
        ));
    }

    #[test]
    fn clamp_examples() {
        let c = Catalog::bundled();
        assert_eq!(c.clamp_to_range("velocity_theta", 200.0).unwrap(), 180.0);
        assert_eq!(c.clamp_to_range("force_x", -10.0).unwrap(), -10.0);
        assert_eq!(c.clamp_to_range("alpha_end", 0.0).unwrap(), 0.1);
        assert_eq!(
            c.clamp_to_range("nope", 1.0),
            Err(CatalogError::UnknownParameter("nope".into()))
        );
    }

    #[test]
    fn resolve_examples() {
        let c = Catalog::bundled();
        assert_eq!(
            c.resolve_path("force_x", 0).unwrap().as_str(),
            "emitters[0].behaviours[force].force.x"
        );
        assert_eq!(
            c.resolve_path("position_x", 3).unwrap(),
            ParamPath::Group {
                sentinel: "__group_position_x".into()
            }
        );
        let p = c.resolve_path("velocity_theta", 1).unwrap();
        assert_eq!(p.as_str(), "emitters[1].initializers[velocity].tha");
        assert_eq!(p.field(), "initializers[velocity].tha");
        assert!(c.resolve_path("unknown", 0).is_err());
    }

    #[test]
    fn validate_examples() {
        let c = Catalog::bundled();
        assert!(c.validate_assignment("particle_lifetime", 2.0).is_ok());
        assert_eq!(
            c.validate_assignment("scale_start", 9.0),
            Err(Violation::AboveMax {
                name: "scale_start".into(),
                value: 9.0,
                max: 5.0
            })
        );
        assert!(matches!(
            c.validate_assignment("unknown_param", 1.0),
            Err(Violation::UnknownParameter { .. })
        ));
        assert!(matches!(
            c.validate_assignment("force_x", f64::NAN),
            Err(Violation::NotFinite { .. })
        ));
    }

    #[test]
    fn document_round_trip() {
        let c = Catalog::bundled();
        let again = Catalog::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(c, again);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clamp_lands_in_range(idx in 0usize..22, x in -1e6f64..1e6) {
                let c = Catalog::bundled();
                let spec = c.iter().nth(idx).unwrap().clone();
                let v = c.clamp_to_range(&spec.name, x).unwrap();
                prop_assert!(v >= spec.min && v <= spec.max);
                prop_assert!(c.validate_assignment(&spec.name, v).is_ok());
            }

            #[test]
            fn resolved_paths_have_no_placeholder(idx in 0usize..22, emitter in 0usize..64) {
                let c = Catalog::bundled();
                let name = c.names().nth(idx).unwrap().to_string();
                let p = c.resolve_path(&name, emitter).unwrap();
                let has_brace = p.as_str().contains('{');
                prop_assert!(!has_brace, "unresolved placeholder in {}", p);
            }
        }
    }
}
