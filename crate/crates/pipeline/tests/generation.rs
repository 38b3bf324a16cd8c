use std::sync::{Arc, Mutex};
use std::time::Duration;

use indexmap::IndexMap;
use serde_json::{json, Value};
use steer_core::{Catalog, Level, SystemState, TemplateKind};
use steer_pipeline::provider::{ProviderError, ProviderRequest, ProviderResponse, ScriptRule};
use steer_pipeline::schema::ValidationError;
use steer_pipeline::{
    assemble_panel, write_through, FailureKind, GenerationContext, Pipeline, Provider, ScriptedProvider, Stage,
};

fn rule(contains: &[&str], response: Value) -> ScriptRule {
    ScriptRule {
        name: contains.join(" + "),
        contains: contains.iter().map(|s| s.to_string()).collect(),
        response,
    }
}

fn pipeline(rules: Vec<ScriptRule>) -> Pipeline {
    Pipeline::new(Arc::new(ScriptedProvider::new(rules)), Arc::new(Catalog::bundled()))
}

fn ctx(prompt: &str) -> GenerationContext {
    let catalog = Catalog::bundled();
    let state = SystemState::instantiate(TemplateKind::Fountain, &catalog, 7).unwrap();
    GenerationContext::from_state(&state, &catalog, prompt)
}

fn validation(err: &steer_pipeline::PipelineError) -> &ValidationError {
    match &err.kind {
        FailureKind::Validation(v) => v,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

struct Failing;

impl Provider for Failing {
    fn send(&self, _: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        Err(ProviderError::Transport("connection refused".into()))
    }
}

// ---------------------------------------------------------------- add/edit

#[test]
fn add_edit_decision() {
    let add = json!({"should_add_particle": true, "particle_type": "firework", "reason": "celebration"});
    let p = pipeline(vec![rule(&["add some fireworks"], add)]);
    let d = p.decide_add_or_edit(&ctx("add some fireworks to celebrate")).unwrap();
    assert!(d.should_add_particle);
    assert_eq!(d.particle_type, Some(TemplateKind::Firework));

    let smoke = json!({"should_add_particle": true, "particle_type": "smoke", "reason": ""});
    let err = pipeline(vec![rule(&["add smoke"], smoke)])
        .decide_add_or_edit(&ctx("add smoke"))
        .unwrap_err();
    assert_eq!(err.stage, Stage::AddEdit);
    assert_eq!(validation(&err), &ValidationError::UnknownType("smoke".into()));

    let err = pipeline(vec![rule(&["hello"], json!("I think you should add fireworks."))])
        .decide_add_or_edit(&ctx("hello"))
        .unwrap_err();
    assert!(matches!(err.kind, FailureKind::Parse(_)), "{err}");

    let err = Pipeline::new(Arc::new(Failing), Arc::new(Catalog::bundled()))
        .decide_add_or_edit(&ctx("x"))
        .unwrap_err();
    assert!(matches!(err.kind, FailureKind::Provider(ProviderError::Transport(_))));
}

// ---------------------------------------------------------------- brushes

fn palette(n: u32) -> Value {
    let icons = ["Wind", "Droplets", "Flame", "Move", "Zap", "Sparkles", "ArrowDownWideNarrow", "Star"];
    let brushes: Vec<Value> = (1..=n)
        .map(|i| {
            json!({
                "brushid": i,
                "functionality": format!("effect number {i}"),
                "color": format!("#{:02X}{:02X}{:02X}", 30 * i, 200 - 20 * i, 90),
                "icon": icons[(i as usize - 1) % icons.len()],
            })
        })
        .collect();
    json!({ "brushes": brushes })
}

#[test]
fn brush_palette_streams_and_validates() {
    let p = Pipeline::new(
        Arc::new(ScriptedProvider::new(vec![rule(&["BRUSH"], palette(7))]).with_chunk(5)),
        Arc::new(Catalog::bundled()),
    );
    let mut seen = Vec::new();
    let brushes = p.generate_brushes(&ctx(""), &mut |b| seen.push(b.brushid)).unwrap();
    assert_eq!(brushes.len(), 7);
    assert_eq!(seen, (1..=7).collect::<Vec<_>>());
    for b in &brushes {
        b.validate(p.icons()).unwrap();
    }

    let err = pipeline(vec![rule(&["BRUSH"], palette(6))])
        .generate_brushes(&ctx(""), &mut |_| {})
        .unwrap_err();
    assert!(matches!(validation(&err), ValidationError::Count { got: 6, .. }));

    let mut bad = palette(7);
    bad["brushes"][2]["icon"] = json!("NotARealIcon");
    let mut seen = Vec::new();
    let err = pipeline(vec![rule(&["BRUSH"], bad)])
        .generate_brushes(&ctx(""), &mut |b| seen.push(b.brushid))
        .unwrap_err();
    assert_eq!(validation(&err), &ValidationError::UnknownIcon("NotARealIcon".into()));
    assert!(!seen.contains(&3));
}

// ---------------------------------------------------------------- hierarchy

fn playful() -> Value {
    json!({
        "panel_name": "Playful Fountain",
        "concepts": [
            {
                "name": "vibrant",
                "description": "Lively, saturated color. Raising it makes the spray feel cheerful.",
                "attributes": [
                    {
                        "name": "candy_colors",
                        "description": "Bright start colors. Pushes the palette toward candy tones.",
                        "technical_parameters": [
                            {"name": "color_start_red", "description": "More red warms the spray."},
                            {"name": "color_start_green", "description": "Less green shifts toward pink."},
                            {"name": "color_start_blue", "description": "More blue keeps it bright."}
                        ]
                    },
                    {
                        "name": "sparkle_size",
                        "description": "Droplet size. Bigger droplets read as bubbly.",
                        "technical_parameters": [
                            {"name": "scale_start", "description": "Larger droplets at birth."}
                        ]
                    }
                ]
            },
            {
                "name": "bouncy",
                "description": "Energetic, springy motion. Raising it adds bounce.",
                "attributes": [
                    {
                        "name": "jet_spread",
                        "description": "Width and speed of the jet. Wider, faster jets feel livelier.",
                        "technical_parameters": [
                            {"name": "velocity_theta", "description": "A wider cone scatters droplets."},
                            {"name": "velocity_radius", "description": "Faster droplets jump higher."}
                        ]
                    }
                ]
            }
        ]
    })
}

#[test]
fn hierarchy_rules() {
    let p = pipeline(vec![rule(&["break it down"], playful())]);
    let h = p.decompose_intent(&ctx("make it more playful")).unwrap();
    assert_eq!(h.concepts.len(), 2);
    let catalog = Catalog::bundled();
    assert!(h.technical_names().iter().all(|n| catalog.contains(n)));

    let mut unknown = playful();
    unknown["concepts"][1]["attributes"][0]["technical_parameters"][0]["name"] = json!("wobble");
    unknown["concepts"][0]["attributes"][1]["technical_parameters"][0]["name"] = json!("glow");
    let err = pipeline(vec![rule(&["break it down"], unknown)])
        .decompose_intent(&ctx("x"))
        .unwrap_err();
    assert_eq!(err.stage, Stage::Intent);
    assert_eq!(
        validation(&err),
        &ValidationError::UnknownParameters(vec!["glow".into(), "wobble".into()])
    );

    let mut split = playful();
    split["concepts"][0]["attributes"][0]["technical_parameters"] =
        json!([{"name": "color_start_red", "description": ""}]);
    let err = pipeline(vec![rule(&["break it down"], split)])
        .decompose_intent(&ctx("x"))
        .unwrap_err();
    assert!(matches!(validation(&err), ValidationError::ChannelGroup { attribute, .. } if attribute == "candy_colors"));

    let mut dup = playful();
    dup["concepts"][1]["attributes"][0]["name"] = json!("sparkle_size");
    let err = pipeline(vec![rule(&["break it down"], dup)])
        .decompose_intent(&ctx("x"))
        .unwrap_err();
    assert_eq!(validation(&err), &ValidationError::DuplicateName("sparkle_size".into()));
}

// ---------------------------------------------------------------- concept UI

fn concept_response(weights: Option<Value>, first_preset_keys: (&str, &str)) -> Value {
    let mut v = json!({
        "parameter_name": "vibrant",
        "min": 0,
        "max": 100,
        "sliderStepLabels": ["muted", "bright", "vivid", "neon"],
        "dropDownOptions": [
            {"label": "pastel", "value": {first_preset_keys.0: 30, first_preset_keys.1: 70}},
            {"label": "neon", "value": {"candy_colors": 95, "sparkle_size": 40}},
            {"label": "bubbly", "value": {"candy_colors": 50, "sparkle_size": 90}}
        ]
    });
    if let Some(w) = weights {
        v["childWeights"] = w;
    }
    v
}

#[test]
fn concept_ui_weights_and_keys() {
    let c = ctx("make it more playful");
    let h = pipeline(vec![rule(&["break it down"], playful())]).decompose_intent(&c).unwrap();
    let concept_rule = |v: Value| rule(&["high-level concept \"vibrant\""], v);

    let weights = json!({"candy_colors": 0.7, "sparkle_size": 0.7});
    let cfg = pipeline(vec![concept_rule(concept_response(Some(weights), ("candy_colors", "sparkle_size")))])
        .generate_concept_ui(&c, &h, 0)
        .unwrap();
    assert_eq!(cfg.child_weights.values().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
    assert_eq!((cfg.min, cfg.max), (0.0, 100.0));

    let cfg = pipeline(vec![concept_rule(concept_response(None, ("candy_colors", "sparkle_size")))])
        .generate_concept_ui(&c, &h, 0)
        .unwrap();
    assert_eq!(cfg.child_weights.values().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);

    let err = pipeline(vec![concept_rule(concept_response(None, ("candy_colors", "glitter")))])
        .generate_concept_ui(&c, &h, 0)
        .unwrap_err();
    assert_eq!(err.stage, Stage::ConceptUi);
    assert!(matches!(validation(&err), ValidationError::Keys { .. }));

    let mut two_labels = concept_response(None, ("candy_colors", "sparkle_size"));
    two_labels["sliderStepLabels"] = json!(["a", "b"]);
    assert!(pipeline(vec![concept_rule(two_labels)]).generate_concept_ui(&c, &h, 0).is_err());
}

// ---------------------------------------------------------------- attribute UI

fn technical(name: &str, min: f64, max: f64) -> Value {
    json!({
        "parameter_name": name,
        "min": min,
        "max": max,
        "sliderStepLabels": ["now", "more", "most"],
        "dropDownOptions": [{"value": max, "label": "goal"}, {"value": min, "label": "start"}]
    })
}

fn jet_response(theta: (f64, f64), radius: (f64, f64)) -> Value {
    json!({
        "attributeConfig": {
            "parameter_name": "jet_spread",
            "min": 0,
            "max": 100,
            "sliderStepLabels": ["tight", "loose", "wild"],
            "dropDownOptions": [
                {"value": {"velocity_theta": 60, "velocity_radius": 20}, "label": "splash"},
                {"value": {"velocity_theta": 20, "velocity_radius": 40}, "label": "geyser"},
                {"value": {"velocity_theta": 200, "velocity_radius": 10}, "label": "sprinkler"}
            ],
            "childWeights": {"velocity_theta": 0.6, "velocity_radius": 0.4}
        },
        "technicalParameterConfigs": [
            technical("velocity_theta", theta.0, theta.1),
            technical("velocity_radius", radius.0, radius.1)
        ]
    })
}

fn jet_context(theta: f64, radius: f64) -> (GenerationContext, steer_pipeline::HierarchySpec) {
    let mut c = ctx("make it more playful");
    c.current_values.insert("velocity_theta".into(), theta);
    c.current_values.insert("velocity_radius".into(), radius);
    let h = pipeline(vec![rule(&["break it down"], playful())]).decompose_intent(&c).unwrap();
    (c, h)
}

#[test]
fn attribute_ui_current_to_goal() {
    let (c, h) = jet_context(0.0, 8.0);
    let p = pipeline(vec![rule(&["attribute \"jet_spread\""], jet_response((10.0, 250.0), (8.0, 20.0)))]);
    let cfg = p.generate_attribute_ui(&c, &h, 1, 0).unwrap();
    assert!(!cfg.fallback);
    let theta = &cfg.technical_parameter_configs[0];
    assert_eq!((theta.min, theta.max), (0.0, 180.0));
    assert_eq!(cfg.attribute_config.drop_down_options[2].values["velocity_theta"], 180.0);
    assert_eq!(cfg.attribute_config.child_weights["velocity_theta"], 0.6);

    let (c, h) = jet_context(100.0, 8.0);
    let p = pipeline(vec![rule(&["attribute \"jet_spread\""], jet_response((100.0, 20.0), (8.0, 2.0)))]);
    let cfg = p.generate_attribute_ui(&c, &h, 1, 0).unwrap();
    let theta = &cfg.technical_parameter_configs[0];
    assert_eq!((theta.min, theta.max), (100.0, 20.0));
}

#[test]
fn attribute_ui_falls_back_per_parameter() {
    let (c, h) = jet_context(0.0, 8.0);
    let single = |name: &str, min: f64, max: f64| {
        rule(
            &[&format!("Technical Parameters: {name}\n")],
            json!({"technicalParameterConfigs": [technical(name, min, max)]}),
        )
    };
    let rules = vec![
        rule(&["Technical Parameters: velocity_theta, velocity_radius"], json!("{\"attributeConfig\": ")),
        single("velocity_theta", 0.0, 45.0),
        single("velocity_radius", 8.0, 16.0),
    ];
    let cfg = pipeline(rules.clone()).generate_attribute_ui(&c, &h, 1, 0).unwrap();
    assert!(cfg.fallback);
    let ranges: Vec<(f64, f64)> = cfg.technical_parameter_configs.iter().map(|t| (t.min, t.max)).collect();
    assert_eq!(ranges, vec![(0.0, 45.0), (8.0, 16.0)]);
    assert_eq!(cfg.attribute_config.child_weights["velocity_radius"], 0.5);
    assert_eq!(cfg.attribute_config.drop_down_options[1].values["velocity_theta"], 22.5);
    let again = pipeline(rules.clone()).generate_attribute_ui(&c, &h, 1, 0).unwrap();
    assert_eq!(cfg, again);

    let err = pipeline(rules[..2].to_vec()).generate_attribute_ui(&c, &h, 1, 0).unwrap_err();
    assert_eq!(err.stage, Stage::AttributeUi);
    assert!(matches!(err.kind, FailureKind::Provider(ProviderError::NoScriptMatch)));
}

// ---------------------------------------------------------------- defaults

#[test]
fn default_value_midpoint_fallback() {
    let c = ctx("make it more playful");
    let failing = Pipeline::new(Arc::new(Failing), Arc::new(Catalog::bundled()));
    assert_eq!(failing.infer_default(&c, "velocity_theta", 0.0, 180.0), 90.0);
    let answer = |v: Value| pipeline(vec![rule(&["\"velocity_theta\""], json!({ "defaultValue": v }))]);
    assert_eq!(answer(json!(400)).infer_default(&c, "velocity_theta", 0.0, 180.0), 90.0);
    assert_eq!(answer(json!(45)).infer_default(&c, "velocity_theta", 0.0, 180.0), 45.0);
    assert_eq!(answer(json!(50)).infer_default(&c, "velocity_theta", 100.0, 20.0), 50.0);
    let garbled = pipeline(vec![rule(&["\"velocity_theta\""], json!("about forty-five"))]);
    assert_eq!(garbled.infer_default(&c, "velocity_theta", 0.0, 180.0), 90.0);
}

// ---------------------------------------------------------------- end to end

fn full_script() -> Vec<ScriptRule> {
    let vibrant = json!({
        "parameter_name": "vibrant",
        "min": 0, "max": 100,
        "sliderStepLabels": ["a", "b", "c"],
        "dropDownOptions": [
            {"label": "x", "value": {"candy_colors": 10, "sparkle_size": 90}},
            {"label": "y", "value": {"candy_colors": 60, "sparkle_size": 30}},
            {"label": "z", "value": {"candy_colors": 100, "sparkle_size": 0}}
        ],
        "childWeights": {"candy_colors": 3, "sparkle_size": 1}
    });
    let bouncy = json!({
        "sliderStepLabels": ["a", "b", "c"],
        "dropDownOptions": [
            {"label": "x", "value": {"jet_spread": 10}},
            {"label": "y", "value": {"jet_spread": 50}},
            {"label": "z", "value": {"jet_spread": 90}}
        ]
    });
    let colors = json!({
        "attributeConfig": {
            "parameter_name": "candy_colors",
            "sliderStepLabels": ["plain", "sweet", "sugary"],
            "dropDownOptions": [
                {"value": {"color_start_red": 255, "color_start_green": 105, "color_start_blue": 180}, "label": "pink"},
                {"value": {"color_start_red": 120, "color_start_green": 220, "color_start_blue": 255}, "label": "sky"},
                {"value": {"color_start_red": 255, "color_start_green": 230, "color_start_blue": 60}, "label": "lemon"}
            ],
            "childWeights": {"color_start_red": 0.5, "color_start_green": 0.2, "color_start_blue": 0.3}
        },
        "technicalParameterConfigs": [
            technical("color_start_red", 0.0, 255.0),
            technical("color_start_green", 0.0, 105.0),
            technical("color_start_blue", 0.0, 180.0)
        ]
    });
    let size = json!({
        "attributeConfig": {
            "sliderStepLabels": ["fine", "round", "plump"],
            "dropDownOptions": [
                {"value": {"scale_start": 1.5}, "label": "a"},
                {"value": {"scale_start": 2.5}, "label": "b"},
                {"value": {"scale_start": 3.5}, "label": "c"}
            ]
        },
        "technicalParameterConfigs": [technical("scale_start", 0.0, 3.0)]
    });
    vec![
        rule(&["break it down"], playful()),
        rule(&["high-level concept \"vibrant\""], vibrant),
        rule(&["high-level concept \"bouncy\""], bouncy),
        rule(&["attribute \"candy_colors\""], colors),
        rule(&["attribute \"sparkle_size\""], size),
        rule(&["attribute \"jet_spread\""], jet_response((0.0, 60.0), (0.0, 20.0))),
        rule(&["\"color_start_red\""], json!({"defaultValue": 200})),
        rule(&["\"velocity_theta\""], json!({"defaultValue": 30})),
        rule(&["\"velocity_radius\""], json!({"defaultValue": 999})),
        rule(&["Determine the appropriate value"], json!({"defaultValue": "n/a"})),
    ]
}

/// Scripted provider that answers after a delay derived from the request,
/// so concurrent stages complete in a scrambled order.
struct Jittery {
    inner: ScriptedProvider,
    order: Mutex<Vec<String>>,
}

impl Provider for Jittery {
    fn send(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let hash = request.hash();
        let delay = u64::from_str_radix(&hash[..2], 16).unwrap() % 20;
        std::thread::sleep(Duration::from_millis(delay));
        self.order.lock().unwrap().push(hash);
        self.inner.send(request)
    }
}

#[test]
fn full_panel_is_assembled_and_order_independent() {
    let catalog = Catalog::bundled();
    let mut state = SystemState::instantiate(TemplateKind::Fountain, &catalog, 7).unwrap();
    let c = GenerationContext::from_state(&state, &catalog, "make it more playful");
    let script = full_script();
    let generated = pipeline(script.clone()).generate_panel(&c).unwrap();
    for _ in 0..3 {
        let jittery = Jittery {
            inner: ScriptedProvider::new(script.clone()),
            order: Mutex::new(Vec::new()),
        };
        let again = Pipeline::new(Arc::new(jittery), Arc::new(catalog.clone()))
            .generate_panel(&c)
            .unwrap();
        assert_eq!(again, generated);
    }

    let expected_defaults: IndexMap<String, f64> = [
        ("color_start_red", 200.0),
        ("color_start_green", c.current_values["color_start_green"] / 2.0 + 105.0 / 2.0),
        ("color_start_blue", c.current_values["color_start_blue"] / 2.0 + 180.0 / 2.0),
        ("scale_start", c.current_values["scale_start"] / 2.0 + 1.5),
        ("velocity_theta", 30.0),
        ("velocity_radius", c.current_values["velocity_radius"] / 2.0 + 10.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    for (k, v) in &expected_defaults {
        assert!((generated.defaults[k] - v).abs() < 1e-12, "{k}: {} vs {v}", generated.defaults[k]);
    }

    let panel = assemble_panel(&generated, &c.system_type, &catalog).unwrap();
    assert!(panel.check_structure().is_empty());
    assert!(panel.check_invariants(&catalog).is_empty());
    for (param, raw) in panel.technical_values() {
        assert!((raw - generated.defaults[&param]).abs() < 1e-9, "{param}");
    }
    assert_eq!(panel.node("vibrant").unwrap().child_weights["candy_colors"], 0.75);

    // Parent values recomputed from the leaves as weighted means.
    for id in panel.nodes.keys() {
        let node = panel.node(id).unwrap();
        if node.level == Level::Technical {
            continue;
        }
        let total: f64 = node.children.iter().map(|ch| node.child_weights[ch]).sum();
        let mean: f64 = node
            .children
            .iter()
            .map(|ch| node.child_weights[ch] * panel.node(ch).unwrap().value)
            .sum::<f64>()
            / total;
        assert!((node.value - mean).abs() < 1e-12, "{id}");
    }

    let written = write_through(&panel, &mut state, &catalog).unwrap();
    assert_eq!(written.len(), 6);
    for (param, value) in written {
        assert_eq!(state.parameter(&param), Some(value));
    }
}

#[test]
fn assembly_refuses_mismatched_inputs() {
    let catalog = Catalog::bundled();
    let state = SystemState::instantiate(TemplateKind::Fountain, &catalog, 7).unwrap();
    let c = GenerationContext::from_state(&state, &catalog, "make it more playful");
    let generated = pipeline(full_script()).generate_panel(&c).unwrap();

    let mut missing_default = generated.clone();
    missing_default.defaults.shift_remove("scale_start");
    let err = assemble_panel(&missing_default, "fountain", &catalog).unwrap_err();
    assert_eq!(err.stage, Stage::Assembly);

    let mut missing_concept = generated.clone();
    missing_concept.concepts.pop();
    assert!(assemble_panel(&missing_concept, "fountain", &catalog).is_err());

    let mut bad_hierarchy = generated;
    bad_hierarchy.hierarchy.concepts[0].attributes[0].technical_parameters[0].name = "heat".into();
    assert!(assemble_panel(&bad_hierarchy, "fountain", &catalog).is_err());
}
