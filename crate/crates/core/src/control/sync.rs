//! Cross-level propagation.
//!
//! Upward: a parent is the weighted mean of its children,
//! `Ĉp = Σ wᵢ·Ĉcᵢ / Σ wᵢ`.
//!
//! Downward: children are scaled by `target / current` and clamped to
//! `[0, 1]`. Whatever clamping loses is redistributed over the children that
//! can still move, for at most [`MAX_REDISTRIBUTION_ITERATIONS`] passes or
//! until the weighted sum is within [`REDISTRIBUTION_TOLERANCE`] of the
//! target. Each pass shifts every adjustable child by `deficit / W`, where
//! `W` is the total weight of the adjustable children, so each child's share
//! of the correction is proportional to its weight.
//!
//! Locked nodes and the node currently being dragged are never written.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{ControlError, Level, PanelConfig};
use crate::scalar::{clamp, Real};

pub const MAX_REDISTRIBUTION_ITERATIONS: usize = 5;
pub const REDISTRIBUTION_TOLERANCE: f64 = 0.001;
/// Below this current value the scale factor is undefined and free
/// children are assigned the target directly.
pub const DEGENERATE_CURRENT: f64 = 1e-6;

/// `weights / Σ weights`, or `1/n` each when the weights are missing, have
/// the wrong length, or do not sum to a positive finite number.
pub fn normalize_weights<S: Real>(weights: &[S], n: usize) -> Vec<S> {
    if n == 0 {
        return Vec::new();
    }
    let uniform = || vec![S::one() / S::from_usize(n).unwrap_or_else(S::one); n];
    if weights.len() != n || weights.iter().any(|w| !w.is_finite() || *w < S::zero()) {
        return uniform();
    }
    let sum = weights.iter().fold(S::zero(), |acc, w| acc + *w);
    if !(sum > S::zero()) || !sum.is_finite() {
        return uniform();
    }
    weights.iter().map(|w| *w / sum).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeChange<S> {
    pub id: String,
    pub old: S,
    pub new: S,
}

/// Audit record of one propagation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncEvent<S> {
    pub origin: String,
    pub changes: Vec<NodeChange<S>>,
    /// Redistribution passes used at the origin's level.
    pub iterations: usize,
    /// `|achieved weighted sum − target|` at the origin's level.
    pub residual: S,
}

impl<S: Real> SyncEvent<S> {
    pub fn changed(&self, id: &str) -> Option<&NodeChange<S>> {
        self.changes.iter().find(|c| c.id == id)
    }
}

#[derive(Default)]
struct Recorder<S> {
    changes: IndexMap<String, (S, S)>,
}

impl<S: Real> Recorder<S> {
    fn note(&mut self, id: &str, old: S, new: S) {
        self.changes
            .entry(id.to_string())
            .and_modify(|e| e.1 = new)
            .or_insert((old, new));
    }

    fn finish(self, origin: &str, iterations: usize, residual: S) -> SyncEvent<S> {
        SyncEvent {
            origin: origin.to_string(),
            changes: self
                .changes
                .into_iter()
                .filter(|(_, (old, new))| old != new)
                .map(|(id, (old, new))| NodeChange { id, old, new })
                .collect(),
            iterations,
            residual,
        }
    }
}

struct Outcome<S> {
    iterations: usize,
    residual: S,
}

impl<S: Real> PanelConfig<S> {
    fn write(&mut self, id: &str, value: S, rec: &mut Recorder<S>) -> Result<(), ControlError> {
        let node = self.node_mut(id)?;
        let old = node.value;
        node.value = clamp(value, S::zero(), S::one());
        let new = node.value;
        rec.note(id, old, new);
        Ok(())
    }

    /// Recomputes `parent` from its children and walks up to the root.
    /// Locked or interacting nodes keep their value; their own ancestors are
    /// still recomputed. Returns the parent's value afterwards.
    pub fn aggregate_up(&mut self, parent: &str) -> Result<S, ControlError> {
        let mut rec = Recorder::default();
        self.aggregate_from(parent, &mut rec)?;
        self.value(parent)
    }

    fn aggregate_from(&mut self, start: &str, rec: &mut Recorder<S>) -> Result<(), ControlError> {
        let mut cur = Some(start.to_string());
        while let Some(id) = cur {
            let node = self.node(&id)?;
            if !node.is_frozen() && !node.children.is_empty() {
                let v = self.weighted_mean(&id)?;
                self.write(&id, v, rec)?;
            }
            cur = self.parent_of(&id).map(str::to_string);
        }
        Ok(())
    }

    /// Moves the children of `parent` so that their weighted mean reaches
    /// `target`, then recurses into each moved child.
    pub fn distribute_down(&mut self, parent: &str, target: S) -> Result<SyncEvent<S>, ControlError> {
        let current = self.value(parent)?;
        let target = clamp(target, S::zero(), S::one());
        let mut rec = Recorder::default();
        let out = self.distribute(parent, current, target, &mut rec)?;
        Ok(rec.finish(parent, out.iterations, out.residual))
    }

    fn distribute(
        &mut self,
        parent: &str,
        current: S,
        target: S,
        rec: &mut Recorder<S>,
    ) -> Result<Outcome<S>, ControlError> {
        let node = self.node(parent)?;
        if node.children.is_empty() {
            return Ok(Outcome {
                iterations: 0,
                residual: S::zero(),
            });
        }
        let children = node.children.clone();
        let weights = node.normalized_weights();
        let old: Vec<S> = children
            .iter()
            .map(|c| self.value(c))
            .collect::<Result<_, _>>()?;
        let free: Vec<bool> = children
            .iter()
            .map(|c| self.node(c).map(|n| !n.is_frozen()))
            .collect::<Result<_, _>>()?;

        let mut values = old.clone();
        if current < S::lit(DEGENERATE_CURRENT) {
            for (v, f) in values.iter_mut().zip(&free) {
                if *f {
                    *v = target;
                }
            }
        } else {
            let scale = target / current;
            for (v, f) in values.iter_mut().zip(&free) {
                if *f {
                    *v = clamp(*v * scale, S::zero(), S::one());
                }
            }
        }

        let weighted_sum =
            |vals: &[S]| vals.iter().zip(&weights).fold(S::zero(), |acc, (v, w)| acc + *v * *w);
        let tolerance = S::lit(REDISTRIBUTION_TOLERANCE);
        let mut iterations = 0;
        loop {
            let deficit = target - weighted_sum(&values);
            if deficit.abs() <= tolerance || iterations >= MAX_REDISTRIBUTION_ITERATIONS {
                break;
            }
            let up = deficit > S::zero();
            let adjustable: Vec<usize> = (0..values.len())
                .filter(|&i| {
                    free[i]
                        && weights[i] > S::zero()
                        && if up { values[i] < S::one() } else { values[i] > S::zero() }
                })
                .collect();
            let capacity = adjustable.iter().fold(S::zero(), |acc, &i| acc + weights[i]);
            if adjustable.is_empty() || !(capacity > S::zero()) {
                break;
            }
            let shift = deficit / capacity;
            for &i in &adjustable {
                values[i] = clamp(values[i] + shift, S::zero(), S::one());
            }
            iterations += 1;
        }
        let residual = (weighted_sum(&values) - target).abs();

        for (i, child) in children.iter().enumerate() {
            if !free[i] || values[i] == old[i] {
                continue;
            }
            self.write(child, values[i], rec)?;
            self.distribute(child, old[i], values[i], rec)?;
        }
        Ok(Outcome { iterations, residual })
    }

    /// A user edit: sets `id` from a raw value in its own range, pushes the
    /// change down through its descendants and up through its ancestors.
    /// The edited node itself is excluded from propagation.
    pub fn set_node_value(&mut self, id: &str, raw: S) -> Result<SyncEvent<S>, ControlError> {
        let node = self.node(id)?;
        if node.locked {
            return Err(ControlError::Locked(id.to_string()));
        }
        let normalized = node.range.normalize(raw)?;
        self.set_normalized(id, normalized)
    }

    /// Like [`set_node_value`](Self::set_node_value) with an already
    /// normalized value.
    pub fn set_normalized(&mut self, id: &str, normalized: S) -> Result<SyncEvent<S>, ControlError> {
        let node = self.node(id)?;
        if node.locked {
            return Err(ControlError::Locked(id.to_string()));
        }
        let target = clamp(normalized, S::zero(), S::one());
        let previous = node.value;

        let mut rec = Recorder::default();
        self.node_mut(id)?.interacting = true;
        let result = (|| {
            self.write(id, target, &mut rec)?;
            // Children of the dragged node are still free; it only excludes itself.
            let out = self.distribute(id, previous, target, &mut rec)?;
            if let Some(parent) = self.parent_of(id).map(str::to_string) {
                self.aggregate_from(&parent, &mut rec)?;
            }
            Ok(out)
        })();
        self.node_mut(id)?.interacting = false;
        let out = result?;
        Ok(rec.finish(id, out.iterations, out.residual))
    }

    /// Jumps the children of `id` to a named preset. On a technical node the
    /// preset is a single value for the node itself.
    pub fn apply_preset(&mut self, id: &str, label: &str) -> Result<SyncEvent<S>, ControlError> {
        let node = self.node(id)?;
        if node.locked {
            return Err(ControlError::Locked(id.to_string()));
        }
        if node.level == Level::Technical {
            let value = node
                .value_presets
                .iter()
                .find(|p| p.label == label)
                .map(|p| p.value)
                .ok_or_else(|| ControlError::UnknownPreset {
                    node: id.to_string(),
                    label: label.to_string(),
                })?;
            return self.set_node_value(id, value);
        }
        let preset = node
            .dropdown_presets
            .iter()
            .find(|p| p.label == label)
            .cloned()
            .ok_or_else(|| ControlError::UnknownPreset {
                node: id.to_string(),
                label: label.to_string(),
            })?;
        let mut rec = Recorder::default();
        if preset.values.is_empty() {
            return Ok(rec.finish(id, 0, S::zero()));
        }

        let children = node.children.clone();
        let weights = node.normalized_weights();
        let mut requested = Vec::with_capacity(children.len());
        for child in &children {
            let c = self.node(child)?;
            let want = match preset.values.get(child) {
                Some(raw) => c.range.normalize(*raw)?,
                None => c.value,
            };
            requested.push(want);
            if preset.values.contains_key(child) && !c.is_frozen() {
                let old = c.value;
                self.write(child, want, &mut rec)?;
                self.distribute(child, old, want, &mut rec)?;
            }
        }
        self.aggregate_from(id, &mut rec)?;

        let mut achieved = S::zero();
        let mut wanted = S::zero();
        for ((child, w), req) in children.iter().zip(&weights).zip(&requested) {
            achieved = achieved + *w * self.value(child)?;
            wanted = wanted + *w * *req;
        }
        Ok(rec.finish(id, 0, (achieved - wanted).abs()))
    }

    pub fn lock_node(&mut self, id: &str, locked: bool) -> Result<(), ControlError> {
        self.node_mut(id)?.locked = locked;
        Ok(())
    }

    /// Writes the `new` value of every change verbatim.
    pub fn apply_changes(&mut self, changes: &[NodeChange<S>]) -> Result<(), ControlError> {
        for c in changes {
            self.node_mut(&c.id)?.value = c.new;
        }
        Ok(())
    }
}
