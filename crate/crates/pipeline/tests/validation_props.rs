use proptest::prelude::*;
use steer_core::Catalog;
use steer_pipeline::schema::{default_or_midpoint, RawGroupConfig, RawGroupOption, RawTechnicalConfig, RawValueOption};

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("step {i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn technical_configs_always_satisfy_invariants(
        index in 0usize..22,
        current_t in 0.0f64..=1.0,
        min in -1e4f64..1e4,
        max in prop_oneof![Just(f64::NAN), -1e4f64..1e4, Just(0.0)],
        same in any::<bool>(),
        presets in prop::collection::vec(-1e4f64..1e4, 0..4),
    ) {
        let catalog = Catalog::bundled();
        let spec = catalog.iter().nth(index).unwrap();
        let current = spec.min + current_t * (spec.max - spec.min);
        let raw = RawTechnicalConfig {
            parameter_name: spec.name.clone(),
            min: Some(min),
            max: Some(if same { current } else { max }),
            slider_step_labels: labels(4),
            drop_down_options: presets
                .iter()
                .map(|v| RawValueOption { label: "p".into(), value: *v })
                .collect(),
        };
        match raw.validate(spec, current) {
            Ok(t) => {
                prop_assert_eq!(t.min, current);
                prop_assert!(t.min != t.max);
                prop_assert!(spec.contains(t.min) && spec.contains(t.max));
                for p in &t.drop_down_options {
                    prop_assert!(spec.contains(p.value));
                }
            }
            Err(_) => prop_assert!(!same && max.is_nan()),
        }
    }

    #[test]
    fn group_weights_sum_to_one(
        weights in prop::collection::vec(prop_oneof![0.0f64..10.0, Just(0.0), -1.0f64..0.0], 1..6),
        label_count in 0usize..8,
    ) {
        let children: Vec<String> = (0..weights.len()).map(|i| format!("c{i}")).collect();
        let preset = |v: f64| RawGroupOption {
            label: "p".into(),
            value: children.iter().map(|c| (c.clone(), v)).collect(),
        };
        let raw = RawGroupConfig {
            parameter_name: None,
            min: Some(5.0),
            max: Some(7.0),
            slider_step_labels: labels(label_count),
            drop_down_options: vec![preset(-10.0), preset(50.0), preset(500.0)],
            child_weights: Some(children.iter().cloned().zip(weights.iter().copied()).collect()),
        };
        let clip = |_: &str, v: f64| v.clamp(0.0, 100.0);
        match raw.validate("g", &children, &clip) {
            Ok(cfg) => {
                prop_assert!((3..=5).contains(&label_count));
                let sum: f64 = cfg.child_weights.values().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(cfg.child_weights.values().all(|w| *w >= 0.0));
                prop_assert_eq!((cfg.min, cfg.max), (0.0, 100.0));
                for p in &cfg.drop_down_options {
                    prop_assert!(p.values.values().all(|v| (0.0..=100.0).contains(v)));
                }
            }
            Err(_) => prop_assert!(!(3..=5).contains(&label_count)),
        }
    }

    #[test]
    fn defaults_stay_in_range(
        value in prop_oneof![Just(None), any::<f64>().prop_map(Some)],
        a in -1e3f64..1e3,
        b in -1e3f64..1e3,
    ) {
        let d = default_or_midpoint(value, a, b);
        prop_assert!(d >= a.min(b) && d <= a.max(b));
    }
}
