use serde::{Deserialize, Serialize};

use super::{SystemState, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleView<S> {
    pub position: Vec3<S>,
    pub velocity: Vec3<S>,
    pub alpha: S,
    pub color: [S; 3],
    pub scale: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics<S> {
    pub mean_position: Vec3<S>,
    pub mean_speed: S,
    pub mean_alpha: S,
}

/// Read-only view of a [`SystemState`] at one instant. This is also the
/// frame document streamed to clients and dumped by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<S> {
    pub frame: u64,
    pub sim_time: S,
    pub particle_count: usize,
    pub particles: Vec<ParticleView<S>>,
    pub metrics: Metrics<S>,
}

impl<S: Real> Snapshot<S> {
    pub fn of(state: &SystemState<S>) -> Snapshot<S> {
        let particles: Vec<ParticleView<S>> = state
            .particles
            .iter()
            .map(|p| ParticleView {
                position: p.position,
                velocity: p.velocity,
                alpha: p.alpha(),
                color: p.color(),
                scale: p.scale(),
            })
            .collect();

        let mut sum_pos = [S::zero(); 3];
        let mut sum_speed = S::zero();
        let mut sum_alpha = S::zero();
        for (view, p) in particles.iter().zip(&state.particles) {
            for (acc, x) in sum_pos.iter_mut().zip(view.position) {
                *acc = *acc + x;
            }
            sum_speed = sum_speed + p.speed();
            sum_alpha = sum_alpha + view.alpha;
        }
        let metrics = if particles.is_empty() {
            Metrics {
                mean_position: [S::zero(); 3],
                mean_speed: S::zero(),
                mean_alpha: S::zero(),
            }
        } else {
            let n = S::from_usize(particles.len()).unwrap_or_else(S::one);
            Metrics {
                mean_position: sum_pos.map(|x| x / n),
                mean_speed: sum_speed / n,
                mean_alpha: sum_alpha / n,
            }
        };

        Snapshot {
            frame: state.frame,
            sim_time: state.sim_time,
            particle_count: particles.len(),
            particles,
            metrics,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }
}

#[cfg(test)]
mod tests {
    use crate::catalog::Catalog;
    use crate::engine::{SystemState, TemplateKind};

    #[test]
    fn fresh_state_is_empty() {
        let s = SystemState::<f64>::instantiate(TemplateKind::Bubbles, &Catalog::bundled(), 0).unwrap();
        let snap = s.snapshot();
        assert_eq!(snap.particle_count, 0);
        assert_eq!(snap.metrics.mean_speed, 0.0);
        assert_eq!(snap, s.clone().snapshot());
    }

    #[test]
    fn frame_document_round_trips() {
        let mut s = SystemState::<f64>::instantiate(TemplateKind::Fire, &Catalog::bundled(), 9).unwrap();
        for _ in 0..10 {
            s.step(1.0 / 30.0);
        }
        let snap = s.snapshot();
        let back: super::Snapshot<f64> = serde_json::from_str(&snap.to_json()).unwrap();
        assert_eq!(back, snap);
    }
}
