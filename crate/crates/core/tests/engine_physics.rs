use std::path::PathBuf;

use steer_core::engine::{sample_cone, RngState, SystemState, TemplateKind};
use steer_core::Catalog;

fn run(kind: TemplateKind, seed: u64, steps: usize) -> Vec<String> {
    let c = Catalog::bundled();
    let mut s = SystemState::<f64>::instantiate(kind, &c, seed).unwrap();
    (0..steps)
        .map(|_| {
            s.step(1.0 / 30.0);
            s.snapshot().to_json()
        })
        .collect()
}

#[test]
fn identical_seeds_give_identical_frames() {
    for kind in TemplateKind::ALL {
        assert_eq!(run(kind, 11, 200), run(kind, 11, 200), "{}", kind.as_str());
    }
    assert_ne!(run(TemplateKind::Fountain, 11, 50), run(TemplateKind::Fountain, 12, 50));
}

#[test]
fn identical_write_sequences_give_identical_frames() {
    let c = Catalog::bundled();
    let drive = || {
        let mut s = SystemState::<f64>::instantiate(TemplateKind::Fire, &c, 3).unwrap();
        let mut out = Vec::new();
        for i in 0..200 {
            if i == 40 {
                s.apply_parameter("velocity_theta", 90.0, &c).unwrap();
            }
            if i == 90 {
                s.apply_parameter("force_x", 12.5, &c).unwrap();
            }
            s.step(0.02);
            out.push(s.snapshot());
        }
        out
    };
    assert_eq!(drive(), drive());
}

#[test]
fn zero_force_keeps_every_speed() {
    let c = Catalog::bundled();
    for kind in TemplateKind::ALL {
        let mut s = SystemState::<f64>::instantiate(kind, &c, 5).unwrap();
        for axis in ["force_x", "force_y", "force_z"] {
            s.apply_parameter(axis, 0.0, &c).unwrap();
        }
        s.apply_parameter("particle_lifetime", 5.0, &c).unwrap();
        s.apply_parameter("emission_time", 0.01, &c).unwrap();
        s.step(0.05);
        // Stop further emission so the particle list is stable.
        s.apply_parameter("emission_time", 1.5, &c).unwrap();
        s.emission_accumulator.iter_mut().for_each(|a| *a = 0.0);
        let speeds: Vec<f64> = s.particles.iter().map(|p| p.speed()).collect();
        let velocities: Vec<[f64; 3]> = s.particles.iter().map(|p| p.velocity).collect();
        assert!(!speeds.is_empty());
        for _ in 0..25 {
            s.step(0.05);
            assert_eq!(s.particles.len(), speeds.len());
            for ((p, v), sp) in s.particles.iter().zip(&velocities).zip(&speeds) {
                assert_eq!(p.velocity, *v);
                assert_eq!(p.speed(), *sp);
            }
        }
    }
}

#[test]
fn force_over_mass_changes_velocity() {
    let c = Catalog::bundled();
    let mut s = SystemState::<f64>::instantiate(TemplateKind::Fountain, &c, 1).unwrap();
    s.apply_parameter("force_y", -50.0, &c).unwrap();
    s.apply_parameter("particle_mass", 10.0, &c).unwrap();
    s.apply_parameter("velocity_radius", 0.0, &c).unwrap();
    s.step(0.1);
    assert!(!s.particles.is_empty());
    for p in &s.particles {
        assert_eq!(p.velocity[1], -0.5);
    }
}

fn polar_degrees(v: [f64; 3], axis: [f64; 3]) -> f64 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let cos = (v[0] * axis[0] + v[1] * axis[1] + v[2] * axis[2]) / n;
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

#[test]
fn sampled_directions_stay_inside_cone() {
    for theta in [0.0, 10.0, 45.0, 90.0, 135.0, 180.0] {
        let mut rng = RngState::new(9);
        let mut stream = rng.stream();
        let mut widest: f64 = 0.0;
        for _ in 0..10_000 {
            let d = sample_cone(&mut stream, [0.0, 1.0, 0.0], theta);
            widest = widest.max(polar_degrees(d, [0.0, 1.0, 0.0]));
        }
        assert!(widest <= theta + 1e-6, "theta {theta}: widest {widest}");
        if theta >= 10.0 {
            assert!(widest >= 0.9 * theta, "theta {theta}: widest {widest}");
        }
    }
}

#[test]
fn spawned_particles_respect_theta() {
    let c = Catalog::bundled();
    let mut s = SystemState::<f64>::instantiate(TemplateKind::Fountain, &c, 2).unwrap();
    s.apply_parameter("velocity_theta", 90.0, &c).unwrap();
    s.apply_parameter("velocity_radius", 10.0, &c).unwrap();
    s.apply_parameter("particles_count", 100.0, &c).unwrap();
    s.apply_parameter("emission_time", 0.01, &c).unwrap();
    s.apply_parameter("particle_lifetime", 5.0, &c).unwrap();
    // Measure birth directions before any force acts.
    let mut widest: f64 = 0.0;
    let mut seen = 0;
    while seen < 10_000 {
        let before = s.particles.len();
        s.apply_parameter("force_y", 0.0, &c).unwrap();
        s.step(0.01);
        for p in &s.particles[before..] {
            widest = widest.max(polar_degrees(p.velocity, [0.0, 1.0, 0.0]));
        }
        seen += s.particles.len() - before;
    }
    assert!(widest <= 90.0 + 1e-6, "{widest}");
}

#[test]
fn alpha_midpoint_is_exact() {
    let c = Catalog::bundled();
    let mut s = SystemState::<f64>::instantiate(TemplateKind::Bubbles, &c, 4).unwrap();
    s.apply_parameter("alpha_start", 1.0, &c).unwrap();
    s.apply_parameter("alpha_end", 0.1, &c).unwrap();
    s.apply_parameter("particle_lifetime", 2.0, &c).unwrap();
    s.apply_parameter("emission_time", 0.5, &c).unwrap();
    // Particles age by the full step they are born in.
    s.step(0.5);
    s.apply_parameter("emission_time", 1.5, &c).unwrap();
    s.emission_accumulator.iter_mut().for_each(|a| *a = 0.0);
    s.step(0.5);
    let p = s.particles.iter().find(|p| p.age == 1.0).expect("particle at half life");
    assert_eq!(p.alpha(), 0.55);
}

#[test]
fn burst_count_matches_floor_oracle() {
    let c = Catalog::bundled();
    for (period, count, dt) in [(0.1, 10.0, 1.0), (0.3, 3.0, 1.0), (0.05, 7.0, 0.5), (1.0, 100.0, 3.5)] {
        let mut s = SystemState::<f64>::instantiate(TemplateKind::Fountain, &c, 1).unwrap();
        s.apply_parameter("emission_time", period, &c).unwrap();
        s.apply_parameter("particles_count", count, &c).unwrap();
        s.apply_parameter("particle_lifetime", 5.0, &c).unwrap();
        s.step(dt);
        let oracle = ((dt / period) + 1e-9).floor() as usize * count as usize;
        assert_eq!(s.particles.len(), oracle, "period {period}");
    }
}

#[test]
fn snapshots_never_hold_expired_particles() {
    let c = Catalog::bundled();
    for kind in TemplateKind::ALL {
        let mut s = SystemState::<f64>::instantiate(kind, &c, 8).unwrap();
        for i in 0..300 {
            s.step(if i % 3 == 0 { 0.07 } else { 0.013 });
            assert!(s.particles.iter().all(|p| p.age >= 0.0 && p.age < p.lifetime));
        }
    }
}

#[test]
fn emitter_fields_stay_in_range() {
    let c = Catalog::bundled();
    let mut s = SystemState::<f64>::instantiate(TemplateKind::Trail, &c, 8).unwrap();
    for spec in c.iter() {
        for v in [spec.min, spec.max, (spec.min + spec.max) / 2.0] {
            s.apply_parameter(&spec.name, v, &c).unwrap();
        }
        assert!(s.apply_parameter(&spec.name, spec.max + 1.0, &c).is_err());
    }
    for (name, value) in s.current_values(&c) {
        assert!(c.validate_assignment(&name, value).is_ok(), "{name} = {value}");
    }
}

#[test]
fn golden_fountain_snapshot() {
    let frames = run(TemplateKind::Fountain, 7, 120);
    let last = frames.last().unwrap();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fountain_seed7_frame120.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, last).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden snapshot missing; rerun with UPDATE_GOLDEN=1");
    assert_eq!(last, &golden);
}
