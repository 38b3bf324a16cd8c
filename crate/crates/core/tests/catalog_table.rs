use steer_core::{Catalog, ParamPath, Violation};

/// (name, min, max, default) as published for the reference engine.
const RANGES: [(&str, f64, f64, f64); 22] = [
    ("particles_count", 1.0, 100.0, 10.0),
    ("emission_time", 0.01, 1.5, 0.1),
    ("particle_mass", 0.1, 100.0, 10.0),
    ("particle_lifetime", 0.1, 5.0, 1.0),
    ("velocity_radius", 0.0, 200.0, 5.0),
    ("velocity_theta", 0.0, 180.0, 0.0),
    ("alpha_start", 0.1, 1.0, 1.0),
    ("alpha_end", 0.1, 1.0, 0.0),
    ("color_start_red", 0.0, 255.0, 255.0),
    ("color_start_green", 0.0, 255.0, 100.0),
    ("color_start_blue", 0.0, 255.0, 0.0),
    ("color_end_red", 0.0, 255.0, 255.0),
    ("color_end_green", 0.0, 255.0, 0.0),
    ("color_end_blue", 0.0, 255.0, 0.0),
    ("scale_start", 0.1, 5.0, 1.0),
    ("scale_end", 0.1, 5.0, 0.5),
    ("force_x", -50.0, 50.0, 0.0),
    ("force_y", -50.0, 50.0, 0.0),
    ("force_z", -50.0, 50.0, 0.0),
    ("position_x", -50.0, 50.0, 0.0),
    ("position_y", -50.0, 50.0, 0.0),
    ("position_z", -50.0, 50.0, 0.0),
];

const MAPPINGS: [(&str, &str); 5] = [
    ("velocity_theta", "emitters[{emitterIndex}].initializers[velocity].tha"),
    ("velocity_radius", "emitters[{emitterIndex}].initializers[velocity].radiusPan"),
    ("force_x", "emitters[{emitterIndex}].behaviours[force].force.x"),
    ("alpha_start", "emitters[{emitterIndex}].behaviours[alpha].alphaA"),
    ("position_x", "__group_position_x"),
];

#[test]
fn bundled_ranges_match_reference_table() {
    let c = Catalog::bundled();
    assert_eq!(c.len(), RANGES.len());
    let names: Vec<&str> = c.names().collect();
    let expected: Vec<&str> = RANGES.iter().map(|r| r.0).collect();
    assert_eq!(names, expected);
    for (name, min, max, default) in RANGES {
        let s = c.spec(name).unwrap();
        assert_eq!((s.min, s.max), (min, max), "{name}");
        // A default below the minimum is pulled up to it on load.
        assert_eq!(s.default, default.clamp(min, max), "{name}");
    }
}

#[test]
fn bundled_document_keeps_published_defaults() {
    let doc: serde_json::Value = serde_json::from_str(Catalog::bundled_document()).unwrap();
    let entries = doc["parameters"].as_array().unwrap();
    for (entry, (name, min, max, default)) in entries.iter().zip(RANGES) {
        assert_eq!(entry["name"], name);
        assert_eq!(entry["min"].as_f64().unwrap(), min);
        assert_eq!(entry["max"].as_f64().unwrap(), max);
        assert_eq!(entry["default"].as_f64().unwrap(), default);
    }
}

#[test]
fn bundled_paths_match_reference_mappings() {
    let c = Catalog::bundled();
    for (name, template) in MAPPINGS {
        assert_eq!(c.spec(name).unwrap().path_template, template);
    }
    for spec in c.iter() {
        for index in [0usize, 1, 7] {
            let p = c.resolve_path(&spec.name, index).unwrap();
            assert!(!p.as_str().contains('{'));
            match p {
                ParamPath::Group { sentinel } => assert!(sentinel.starts_with("__group_position_")),
                ParamPath::Emitter { index: i, path } => {
                    assert_eq!(i, index);
                    assert_eq!(path, spec.path_template.replace("{emitterIndex}", &index.to_string()));
                }
            }
        }
    }
}

#[test]
fn named_examples() {
    let c = Catalog::bundled();
    assert_eq!(
        c.resolve_path("force_x", 0).unwrap().as_str(),
        "emitters[0].behaviours[force].force.x"
    );
    assert_eq!(c.resolve_path("position_x", 3).unwrap().as_str(), "__group_position_x");
    assert_eq!(
        c.resolve_path("velocity_theta", 1).unwrap().as_str(),
        "emitters[1].initializers[velocity].tha"
    );
    assert_eq!(c.clamp_to_range("velocity_theta", 200.0).unwrap(), 180.0);
    assert_eq!(c.clamp_to_range("force_x", -10.0).unwrap(), -10.0);
    assert_eq!(c.clamp_to_range("alpha_end", 0.0).unwrap(), 0.1);
    assert!(c.validate_assignment("particle_lifetime", 2.0).is_ok());
    assert!(matches!(
        c.validate_assignment("scale_start", 9.0),
        Err(Violation::AboveMax { .. })
    ));
    assert!(matches!(
        c.validate_assignment("unknown_param", 1.0),
        Err(Violation::UnknownParameter { .. })
    ));
}

#[test]
fn catalog_file_round_trips() {
    let dir = std::env::temp_dir().join(format!("steer-catalog-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("catalog.json");
    std::fs::write(&path, Catalog::bundled().to_json_string()).unwrap();
    let loaded = Catalog::load(&path).unwrap();
    assert_eq!(loaded, Catalog::bundled());
    std::fs::remove_dir_all(&dir).unwrap();
}
