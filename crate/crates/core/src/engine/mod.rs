//! Deterministic, fixed-timestep particle simulation.
//!
//! Each [`step`](SystemState::step) runs spawn, integrate and cull in that
//! order. Randomness comes only from the state's [`RngState`], so identical
//! templates, seeds, parameter writes and `dt` sequences produce
//! bit-identical states.

mod rng;
mod snapshot;
mod template;

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError, ParamPath, Violation};
use crate::scalar::Real;

pub use rng::{RngState, RngStream};
pub use snapshot::{Metrics, ParticleView, Snapshot};
pub use template::TemplatePreset;

pub type Vec3<S> = [S; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unknown template kind `{0}`")]
    UnknownTemplate(String),
    #[error(transparent)]
    Range(#[from] Violation),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("engine has no field at path `{0}`")]
    UnmappedPath(String),
    #[error("emitter index {0} out of bounds")]
    NoSuchEmitter(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Fire,
    Fountain,
    Firework,
    Bubbles,
    Trail,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 5] = [
        TemplateKind::Fire,
        TemplateKind::Fountain,
        TemplateKind::Firework,
        TemplateKind::Bubbles,
        TemplateKind::Trail,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateKind::Fire => "fire",
            TemplateKind::Fountain => "fountain",
            TemplateKind::Firework => "firework",
            TemplateKind::Bubbles => "bubbles",
            TemplateKind::Trail => "trail",
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateKind {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fire" => Ok(TemplateKind::Fire),
            "fountain" => Ok(TemplateKind::Fountain),
            "firework" | "fireworks" => Ok(TemplateKind::Firework),
            "bubbles" | "bubble" => Ok(TemplateKind::Bubbles),
            "trail" | "trail-effect" => Ok(TemplateKind::Trail),
            _ => Err(EngineError::UnknownTemplate(s.to_string())),
        }
    }
}

/// One field per catalog parameter, plus the template's emission axis and
/// speed constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterConfig<S> {
    pub particles_count: S,
    pub emission_time: S,
    pub particle_mass: S,
    pub particle_lifetime: S,
    pub velocity_theta: S,
    pub velocity_radius: S,
    pub alpha_start: S,
    pub alpha_end: S,
    pub color_start: [S; 3],
    pub color_end: [S; 3],
    pub scale_start: S,
    pub scale_end: S,
    pub force: Vec3<S>,
    pub position: Vec3<S>,
    /// Unit vector particles are emitted around.
    pub axis: Vec3<S>,
    /// Initial speed is `velocity_radius * speed_scale`.
    pub speed_scale: S,
}

impl<S: Real> EmitterConfig<S> {
    /// Reads a field by catalog parameter name.
    pub fn get(&self, name: &str) -> Option<S> {
        Some(match name {
            "particles_count" => self.particles_count,
            "emission_time" => self.emission_time,
            "particle_mass" => self.particle_mass,
            "particle_lifetime" => self.particle_lifetime,
            "velocity_theta" => self.velocity_theta,
            "velocity_radius" => self.velocity_radius,
            "alpha_start" => self.alpha_start,
            "alpha_end" => self.alpha_end,
            "color_start_red" => self.color_start[0],
            "color_start_green" => self.color_start[1],
            "color_start_blue" => self.color_start[2],
            "color_end_red" => self.color_end[0],
            "color_end_green" => self.color_end[1],
            "color_end_blue" => self.color_end[2],
            "scale_start" => self.scale_start,
            "scale_end" => self.scale_end,
            "force_x" => self.force[0],
            "force_y" => self.force[1],
            "force_z" => self.force[2],
            "position_x" => self.position[0],
            "position_y" => self.position[1],
            "position_z" => self.position[2],
            _ => return None,
        })
    }

    /// Mutable access by engine field path (the part after `emitters[N].`).
    fn field_mut(&mut self, field: &str) -> Option<&mut S> {
        Some(match field {
            "emitterRate.numPan" => &mut self.particles_count,
            "emitterRate.timePan" => &mut self.emission_time,
            "initializers[mass].massPan" => &mut self.particle_mass,
            "initializers[life].lifePan" => &mut self.particle_lifetime,
            "initializers[velocity].tha" => &mut self.velocity_theta,
            "initializers[velocity].radiusPan" => &mut self.velocity_radius,
            "behaviours[alpha].alphaA" => &mut self.alpha_start,
            "behaviours[alpha].alphaB" => &mut self.alpha_end,
            "behaviours[color].colorA.r" => &mut self.color_start[0],
            "behaviours[color].colorA.g" => &mut self.color_start[1],
            "behaviours[color].colorA.b" => &mut self.color_start[2],
            "behaviours[color].colorB.r" => &mut self.color_end[0],
            "behaviours[color].colorB.g" => &mut self.color_end[1],
            "behaviours[color].colorB.b" => &mut self.color_end[2],
            "behaviours[scale].scaleA" => &mut self.scale_start,
            "behaviours[scale].scaleB" => &mut self.scale_end,
            "behaviours[force].force.x" => &mut self.force[0],
            "behaviours[force].force.y" => &mut self.force[1],
            "behaviours[force].force.z" => &mut self.force[2],
            _ => return None,
        })
    }

    fn group_mut(&mut self, sentinel: &str) -> Option<&mut S> {
        Some(match sentinel {
            "__group_position_x" => &mut self.position[0],
            "__group_position_y" => &mut self.position[1],
            "__group_position_z" => &mut self.position[2],
            _ => return None,
        })
    }

    /// Values of every catalog parameter, in catalog order.
    pub fn values(&self, catalog: &Catalog) -> IndexMap<String, f64> {
        catalog
            .names()
            .filter_map(|n| self.get(n).map(|v| (n.to_string(), v.to_f64_lossy())))
            .collect()
    }

    /// Particles spawned per burst.
    pub fn burst_size(&self) -> usize {
        self.particles_count.round().to_usize().unwrap_or(0)
    }
}

/// Interpolation endpoints captured when a particle is spawned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthConfig<S> {
    pub alpha: [S; 2],
    pub color_start: [S; 3],
    pub color_end: [S; 3],
    pub scale: [S; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle<S> {
    pub emitter: usize,
    pub position: Vec3<S>,
    pub velocity: Vec3<S>,
    pub age: S,
    pub lifetime: S,
    pub mass: S,
    pub birth: BirthConfig<S>,
}

/// Linear blend `a·(1−t) + b·t`.
#[inline]
pub fn lerp<S: Real>(a: S, b: S, t: S) -> S {
    a * (S::one() - t) + b * t
}

impl<S: Real> Particle<S> {
    /// Normalized age in `[0, 1]`.
    pub fn progress(&self) -> S {
        if self.lifetime <= S::zero() {
            return S::one();
        }
        crate::scalar::clamp(self.age / self.lifetime, S::zero(), S::one())
    }

    pub fn alpha(&self) -> S {
        lerp(self.birth.alpha[0], self.birth.alpha[1], self.progress())
    }

    pub fn color(&self) -> [S; 3] {
        let t = self.progress();
        std::array::from_fn(|i| lerp(self.birth.color_start[i], self.birth.color_end[i], t))
    }

    pub fn scale(&self) -> S {
        lerp(self.birth.scale[0], self.birth.scale[1], self.progress())
    }

    pub fn speed(&self) -> S {
        norm(self.velocity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState<S> {
    pub template_kind: TemplateKind,
    pub emitters: Vec<EmitterConfig<S>>,
    pub particles: Vec<Particle<S>>,
    pub emission_accumulator: Vec<S>,
    pub rng_state: RngState,
    pub sim_time: S,
    pub frame: u64,
}

impl<S: Real> SystemState<S> {
    /// A fresh system from one of the preset templates.
    pub fn instantiate(kind: TemplateKind, catalog: &Catalog, seed: u64) -> Result<Self, EngineError> {
        let emitter = TemplatePreset::for_kind(kind).emitter::<S>();
        for name in catalog.names() {
            if let Some(v) = emitter.get(name) {
                catalog.validate_assignment(name, v.to_f64_lossy())?;
            }
        }
        Ok(SystemState {
            template_kind: kind,
            emitters: vec![emitter],
            particles: Vec::new(),
            emission_accumulator: vec![S::zero()],
            rng_state: RngState::new(seed),
            sim_time: S::zero(),
            frame: 0,
        })
    }

    /// Parses `kind` and instantiates it.
    pub fn instantiate_named(kind: &str, catalog: &Catalog, seed: u64) -> Result<Self, EngineError> {
        SystemState::instantiate(kind.parse()?, catalog, seed)
    }

    /// Current value of a parameter on the first emitter.
    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.emitters.first()?.get(name).map(Real::to_f64_lossy)
    }

    /// Live parameter values of the first emitter.
    pub fn current_values(&self, catalog: &Catalog) -> IndexMap<String, f64> {
        self.emitters
            .first()
            .map(|e| e.values(catalog))
            .unwrap_or_default()
    }

    /// Writes `value` to parameter `name` on every emitter.
    pub fn apply_parameter(&mut self, name: &str, value: f64, catalog: &Catalog) -> Result<(), EngineError> {
        catalog.validate_assignment(name, value)?;
        for index in 0..self.emitters.len() {
            self.write(catalog.resolve_path(name, index)?, value)?;
        }
        Ok(())
    }

    /// Writes `value` to parameter `name` on one emitter. Group parameters
    /// still affect the whole system.
    pub fn apply_parameter_at(
        &mut self,
        name: &str,
        value: f64,
        emitter_index: usize,
        catalog: &Catalog,
    ) -> Result<(), EngineError> {
        catalog.validate_assignment(name, value)?;
        if emitter_index >= self.emitters.len() {
            return Err(EngineError::NoSuchEmitter(emitter_index));
        }
        self.write(catalog.resolve_path(name, emitter_index)?, value)
    }

    fn write(&mut self, path: ParamPath, value: f64) -> Result<(), EngineError> {
        let v = S::lit(value);
        match &path {
            ParamPath::Emitter { index, .. } => {
                let emitter = self
                    .emitters
                    .get_mut(*index)
                    .ok_or(EngineError::NoSuchEmitter(*index))?;
                let slot = emitter
                    .field_mut(path.field())
                    .ok_or_else(|| EngineError::UnmappedPath(path.as_str().to_string()))?;
                *slot = v;
            }
            ParamPath::Group { sentinel } => {
                for emitter in &mut self.emitters {
                    let slot = emitter
                        .group_mut(sentinel)
                        .ok_or_else(|| EngineError::UnmappedPath(sentinel.clone()))?;
                    *slot = v;
                }
            }
        }
        Ok(())
    }

    /// Advances the simulation by `dt` seconds. Non-positive or non-finite
    /// `dt` is ignored.
    pub fn step(&mut self, dt: S) {
        if !(dt > S::zero()) || !dt.is_finite() {
            return;
        }
        self.spawn(dt);
        self.integrate(dt);
        self.particles.retain(|p| p.age < p.lifetime);
        self.sim_time = self.sim_time + dt;
        self.frame += 1;
    }

    fn spawn(&mut self, dt: S) {
        // Tolerance for accumulated rounding, e.g. ten 0.1 s intervals in 1.0 s.
        let slack = S::lit(1e-9);
        for index in 0..self.emitters.len() {
            let period = self.emitters[index].emission_time;
            let acc = self.emission_accumulator[index] + dt;
            let bursts = if period > S::zero() {
                (acc / period + slack).floor()
            } else {
                S::zero()
            };
            let remaining = acc - bursts * period;
            self.emission_accumulator[index] = if remaining > S::zero() { remaining } else { S::zero() };

            let n = bursts.to_usize().unwrap_or(0) * self.emitters[index].burst_size();
            if n == 0 {
                continue;
            }
            let emitter = self.emitters[index].clone();
            let mut stream = self.rng_state.stream();
            self.particles.reserve(n);
            for _ in 0..n {
                let dir = sample_cone(&mut stream, emitter.axis, emitter.velocity_theta);
                let speed = emitter.velocity_radius * emitter.speed_scale;
                self.particles.push(Particle {
                    emitter: index,
                    position: emitter.position,
                    velocity: scale3(dir, speed),
                    age: S::zero(),
                    lifetime: emitter.particle_lifetime,
                    mass: emitter.particle_mass,
                    birth: BirthConfig {
                        alpha: [emitter.alpha_start, emitter.alpha_end],
                        color_start: emitter.color_start,
                        color_end: emitter.color_end,
                        scale: [emitter.scale_start, emitter.scale_end],
                    },
                });
            }
        }
    }

    fn integrate(&mut self, dt: S) {
        for p in &mut self.particles {
            let force = self.emitters[p.emitter].force;
            for i in 0..3 {
                p.velocity[i] = p.velocity[i] + force[i] / p.mass * dt;
                p.position[i] = p.position[i] + p.velocity[i] * dt;
            }
            p.age = p.age + dt;
        }
    }

    pub fn snapshot(&self) -> Snapshot<S> {
        Snapshot::of(self)
    }
}

/// Direction uniformly distributed on the spherical cap of half-angle
/// `theta_deg` degrees around `axis`.
pub fn sample_cone<S: Real>(stream: &mut RngStream<'_>, axis: Vec3<S>, theta_deg: S) -> Vec3<S> {
    let theta = crate::scalar::clamp(theta_deg, S::zero(), S::lit(180.0)).to_radians();
    let u: S = stream.unit();
    let v: S = stream.unit();
    let cos_min = theta.det_cos();
    let cos_polar = S::one() - u * (S::one() - cos_min);
    let sin_polar = (S::one() - cos_polar * cos_polar).max(S::zero()).sqrt();
    let azimuth = S::lit(2.0) * S::PI() * v;

    let (t1, t2) = basis(axis);
    let radial = add3(scale3(t1, azimuth.det_cos()), scale3(t2, azimuth.det_sin()));
    add3(scale3(axis, cos_polar), scale3(radial, sin_polar))
}

fn basis<S: Real>(axis: Vec3<S>) -> (Vec3<S>, Vec3<S>) {
    let helper = if axis[0].abs() < S::lit(0.9) {
        [S::one(), S::zero(), S::zero()]
    } else {
        [S::zero(), S::one(), S::zero()]
    };
    let t1 = normalize3(cross3(helper, axis));
    let t2 = cross3(axis, t1);
    (t1, t2)
}

pub(crate) fn norm<S: Real>(a: Vec3<S>) -> S {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn scale3<S: Real>(a: Vec3<S>, k: S) -> Vec3<S> {
    [a[0] * k, a[1] * k, a[2] * k]
}

fn add3<S: Real>(a: Vec3<S>, b: Vec3<S>) -> Vec3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn cross3<S: Real>(a: Vec3<S>, b: Vec3<S>) -> Vec3<S> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize3<S: Real>(a: Vec3<S>) -> Vec3<S> {
    let n = norm(a);
    if n > S::zero() {
        scale3(a, S::one() / n)
    } else {
        a
    }
}
