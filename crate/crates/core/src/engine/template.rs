//! Preset emitter configurations for the five template kinds.
//!
//! | kind     | count | period | mass | life | radius | theta | force y | axis | speed |
//! |----------|-------|--------|------|------|--------|-------|---------|------|-------|
//! | fire     | 8     | 0.05   | 1    | 1.2  | 3      | 20    | +4      | +y   | 1     |
//! | fountain | 10    | 0.1    | 10   | 4    | 12     | 15    | −50     | +y   | 1     |
//! | firework | 60    | 1.5    | 5    | 1.8  | 15     | 180   | −10     | +y   | 1     |
//! | bubbles  | 3     | 0.3    | 1    | 4    | 1.5    | 30    | +1      | +y   | 1     |
//! | trail    | 5     | 0.02   | 2    | 0.8  | 0.5    | 60    | 0       | −z   | 1     |
//!
//! The fountain rises for `12 / (50 / 10) = 2.4 s` and falls back before it
//! expires. The firework sits 10 units up and bursts over the full sphere.

use serde::{Deserialize, Serialize};

use super::{EmitterConfig, TemplateKind};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplatePreset {
    pub kind: TemplateKind,
    pub particles_count: f64,
    pub emission_time: f64,
    pub particle_mass: f64,
    pub particle_lifetime: f64,
    pub velocity_theta: f64,
    pub velocity_radius: f64,
    pub alpha: [f64; 2],
    pub color_start: [f64; 3],
    pub color_end: [f64; 3],
    pub scale: [f64; 2],
    pub force: [f64; 3],
    pub position: [f64; 3],
    pub axis: [f64; 3],
    pub speed_scale: f64,
}

const FIRE: TemplatePreset = TemplatePreset {
    kind: TemplateKind::Fire,
    particles_count: 8.0,
    emission_time: 0.05,
    particle_mass: 1.0,
    particle_lifetime: 1.2,
    velocity_theta: 20.0,
    velocity_radius: 3.0,
    alpha: [1.0, 0.1],
    color_start: [255.0, 120.0, 0.0],
    color_end: [255.0, 20.0, 0.0],
    scale: [1.5, 0.3],
    force: [0.0, 4.0, 0.0],
    position: [0.0, 0.0, 0.0],
    axis: [0.0, 1.0, 0.0],
    speed_scale: 1.0,
};

const FOUNTAIN: TemplatePreset = TemplatePreset {
    kind: TemplateKind::Fountain,
    particles_count: 10.0,
    emission_time: 0.1,
    particle_mass: 10.0,
    particle_lifetime: 4.0,
    velocity_theta: 15.0,
    velocity_radius: 12.0,
    alpha: [1.0, 0.3],
    color_start: [120.0, 180.0, 255.0],
    color_end: [200.0, 230.0, 255.0],
    scale: [1.0, 0.5],
    force: [0.0, -50.0, 0.0],
    position: [0.0, 0.0, 0.0],
    axis: [0.0, 1.0, 0.0],
    speed_scale: 1.0,
};

const FIREWORK: TemplatePreset = TemplatePreset {
    kind: TemplateKind::Firework,
    particles_count: 60.0,
    emission_time: 1.5,
    particle_mass: 5.0,
    particle_lifetime: 1.8,
    velocity_theta: 180.0,
    velocity_radius: 15.0,
    alpha: [1.0, 0.1],
    color_start: [255.0, 220.0, 80.0],
    color_end: [255.0, 60.0, 120.0],
    scale: [1.2, 0.2],
    force: [0.0, -10.0, 0.0],
    position: [0.0, 10.0, 0.0],
    axis: [0.0, 1.0, 0.0],
    speed_scale: 1.0,
};

const BUBBLES: TemplatePreset = TemplatePreset {
    kind: TemplateKind::Bubbles,
    particles_count: 3.0,
    emission_time: 0.3,
    particle_mass: 1.0,
    particle_lifetime: 4.0,
    velocity_theta: 30.0,
    velocity_radius: 1.5,
    alpha: [0.6, 0.1],
    color_start: [170.0, 220.0, 255.0],
    color_end: [220.0, 240.0, 255.0],
    scale: [0.5, 1.5],
    force: [0.0, 1.0, 0.0],
    position: [0.0, 0.0, 0.0],
    axis: [0.0, 1.0, 0.0],
    speed_scale: 1.0,
};

const TRAIL: TemplatePreset = TemplatePreset {
    kind: TemplateKind::Trail,
    particles_count: 5.0,
    emission_time: 0.02,
    particle_mass: 2.0,
    particle_lifetime: 0.8,
    velocity_theta: 60.0,
    velocity_radius: 0.5,
    alpha: [0.9, 0.1],
    color_start: [255.0, 255.0, 255.0],
    color_end: [120.0, 160.0, 255.0],
    scale: [0.8, 0.1],
    force: [0.0, 0.0, 0.0],
    position: [0.0, 0.0, 0.0],
    axis: [0.0, 0.0, -1.0],
    speed_scale: 1.0,
};

impl TemplatePreset {
    pub fn for_kind(kind: TemplateKind) -> TemplatePreset {
        match kind {
            TemplateKind::Fire => FIRE,
            TemplateKind::Fountain => FOUNTAIN,
            TemplateKind::Firework => FIREWORK,
            TemplateKind::Bubbles => BUBBLES,
            TemplateKind::Trail => TRAIL,
        }
    }

    pub fn emitter<S: Real>(&self) -> EmitterConfig<S> {
        let v3 = |a: [f64; 3]| a.map(S::lit);
        EmitterConfig {
            particles_count: S::lit(self.particles_count),
            emission_time: S::lit(self.emission_time),
            particle_mass: S::lit(self.particle_mass),
            particle_lifetime: S::lit(self.particle_lifetime),
            velocity_theta: S::lit(self.velocity_theta),
            velocity_radius: S::lit(self.velocity_radius),
            alpha_start: S::lit(self.alpha[0]),
            alpha_end: S::lit(self.alpha[1]),
            color_start: v3(self.color_start),
            color_end: v3(self.color_end),
            scale_start: S::lit(self.scale[0]),
            scale_end: S::lit(self.scale[1]),
            force: v3(self.force),
            position: v3(self.position),
            axis: v3(self.axis),
            speed_scale: S::lit(self.speed_scale),
        }
    }
}
