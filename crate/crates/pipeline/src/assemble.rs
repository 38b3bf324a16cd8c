//! Builds a control panel from validated generation output.

use steer_core::{Catalog, ControlNode, ControlRange, EngineError, Level, PanelConfig, SystemState};

use crate::generate::{FailureKind, GeneratedPanel, PipelineError, Stage};

fn refuse(reason: impl Into<String>) -> PipelineError {
    PipelineError::new(Stage::Assembly, FailureKind::Assembly(reason.into()))
}

/// Nests concepts, attributes and bound technical nodes with their weights,
/// widget settings and defaults. Inputs that do not line up with the
/// hierarchy are refused.
pub fn assemble_panel(
    generated: &GeneratedPanel,
    system_type: &str,
    catalog: &Catalog,
) -> Result<PanelConfig, PipelineError> {
    let h = &generated.hierarchy;
    h.validate(catalog).map_err(|e| PipelineError::new(Stage::Assembly, e))?;
    if generated.concepts.len() != h.concepts.len() {
        return Err(refuse(format!(
            "{} concept configs for {} concepts",
            generated.concepts.len(),
            h.concepts.len()
        )));
    }
    let ctl = |e: steer_core::ControlError| refuse(e.to_string());
    let mut panel = PanelConfig::new(&h.panel_name, system_type);

    for (concept, cfg) in h.concepts.iter().zip(&generated.concepts) {
        if cfg.parameter_name != concept.name {
            return Err(refuse(format!("config `{}` given for concept `{}`", cfg.parameter_name, concept.name)));
        }
        let mut node = ControlNode::new(&concept.name, Level::Concept, ControlRange::percent());
        node.description = concept.description.clone();
        node.step_labels = cfg.slider_step_labels.clone();
        node.dropdown_presets = cfg.drop_down_options.clone();
        panel.add_root(node).map_err(ctl)?;

        for attribute in &concept.attributes {
            let weight = *cfg
                .child_weights
                .get(&attribute.name)
                .ok_or_else(|| refuse(format!("no weight for attribute `{}`", attribute.name)))?;
            let acfg = generated
                .attributes
                .get(&attribute.name)
                .ok_or_else(|| refuse(format!("no config for attribute `{}`", attribute.name)))?;
            let group = &acfg.attribute_config;
            let mut node = ControlNode::new(&attribute.name, Level::Attribute, ControlRange::percent());
            node.description = attribute.description.clone();
            node.step_labels = group.slider_step_labels.clone();
            node.dropdown_presets = group.drop_down_options.clone();
            panel.add_child(&concept.name, node, weight).map_err(ctl)?;

            for tech in &attribute.technical_parameters {
                let tcfg = acfg
                    .technical_parameter_configs
                    .iter()
                    .find(|t| t.parameter_name == tech.name)
                    .ok_or_else(|| refuse(format!("no config for parameter `{}`", tech.name)))?;
                let weight = *group
                    .child_weights
                    .get(&tech.name)
                    .ok_or_else(|| refuse(format!("no weight for parameter `{}`", tech.name)))?;
                let default = *generated
                    .defaults
                    .get(&tech.name)
                    .ok_or_else(|| refuse(format!("no default for parameter `{}`", tech.name)))?;
                let range = ControlRange::new(tcfg.min, tcfg.max).map_err(ctl)?;
                let mut node = ControlNode::new(&tech.name, Level::Technical, range)
                    .with_value(range.normalize(default).map_err(ctl)?);
                node.description = tech.description.clone();
                node.step_labels = tcfg.slider_step_labels.clone();
                node.value_presets = tcfg.drop_down_options.clone();
                panel.add_child(&attribute.name, node, weight).map_err(ctl)?;
                panel.bind(&tech.name, &tech.name).map_err(ctl)?;
            }
        }
    }
    panel.finalize().map_err(ctl)?;

    let mut problems = panel.check_structure();
    problems.extend(panel.check_invariants(catalog));
    if !problems.is_empty() {
        return Err(refuse(problems.join("; ")));
    }
    Ok(panel)
}

/// Writes every bound technical value into the engine, clamped to the
/// catalog range. Returns the values written.
pub fn write_through(
    panel: &PanelConfig,
    state: &mut SystemState,
    catalog: &Catalog,
) -> Result<Vec<(String, f64)>, EngineError> {
    let mut written = Vec::new();
    for (param, raw) in panel.technical_values() {
        let value = catalog.clamp_to_range(&param, raw)?;
        state.apply_parameter(&param, value, catalog)?;
        written.push((param, value));
    }
    Ok(written)
}
