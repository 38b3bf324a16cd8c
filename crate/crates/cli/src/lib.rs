//! Headless workflow driver: scene, intent, control edits, simulation and
//! artifact dump, all through the service's in-process session core.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use indexmap::IndexMap;
use serde::Serialize;
use sha2::{Digest, Sha256};
use steer_core::engine::Metrics;
use steer_service::{
    ControlAction, ErrorBody, IntentOutcome, IntentRequest, PaletteStatus, ProviderArgs, SceneManifest,
    ServiceError, SessionManager, SetupError, SketchSubmission,
};

#[derive(Debug, Clone, Parser)]
#[command(name = "steer", version, about = "Run a scene through intent, controls and simulation")]
pub struct CliConfig {
    /// Scene manifest (template, seed, objects).
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// Intent text submitted after the scene loads.
    #[arg(long)]
    pub prompt: Option<String>,
    /// Sketch submitted with the prompt.
    #[arg(long, requires = "prompt")]
    pub sketch: Option<PathBuf>,
    /// Control assignment `node=value` in the node's raw range; repeatable.
    #[arg(long = "set", value_parser = parse_assignment)]
    pub sets: Vec<(String, f64)>,
    #[arg(long, default_value_t = 0)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0 / 60.0)]
    pub dt: f64,
    /// Overrides the manifest seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for frame documents and the run manifest.
    #[arg(long)]
    pub dump_frames: Option<PathBuf>,
    /// Dump every n-th frame; the final frame is always dumped.
    #[arg(long, default_value_t = 1)]
    pub frame_every: usize,
    #[arg(long)]
    pub save_panel: Option<PathBuf>,
    /// Panel document installed before the prompt runs.
    #[arg(long)]
    pub load_panel: Option<PathBuf>,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (node, value) = s.split_once('=').ok_or_else(|| format!("expected node=value, got `{s}`"))?;
    let value: f64 = value.trim().parse().map_err(|_| format!("`{value}` is not a number"))?;
    Ok((node.trim().to_string(), value))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Setup(#[from] SetupError),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Service(#[from] ServiceError),
    #[error("{path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Stage label and reason, as printed on failure.
    pub fn body(&self) -> ErrorBody {
        match self {
            CliError::Service(e) => e.body(),
            CliError::Setup(e) => ErrorBody {
                stage: "config".into(),
                reason: e.to_string(),
            },
            CliError::Input { .. } => ErrorBody {
                stage: "input".into(),
                reason: self.to_string(),
            },
            CliError::Output { .. } => ErrorBody {
                stage: "output".into(),
                reason: self.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameEntry {
    pub frame: u64,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum IntentSummary {
    NewSystem {
        reason: String,
        system_type: String,
    },
    Panel {
        reason: String,
        panel_name: String,
        concepts: Vec<String>,
        engine: IndexMap<String, f64>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct SetSummary {
    pub node: String,
    pub value: f64,
    pub changed: usize,
    pub engine: IndexMap<String, f64>,
}

/// Run manifest written next to the frames.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub template: String,
    pub seed: u64,
    pub prompt: Option<String>,
    pub intent: Option<IntentSummary>,
    pub palette: PaletteStatus,
    pub sets: Vec<SetSummary>,
    pub system_type: String,
    pub steps: usize,
    pub dt: f64,
    pub final_frame: u64,
    pub particle_count: usize,
    pub metrics: Metrics<f64>,
    pub frames: Vec<FrameEntry>,
    /// Parameter values of the engine after the run.
    pub parameters: IndexMap<String, f64>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    let out = |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(out)?;
    }
    fs::write(path, contents).map_err(out)
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Executes the configured workflow and writes the requested artifacts.
pub fn run(config: &CliConfig) -> Result<RunReport, CliError> {
    let mut manifest: SceneManifest = parse(&config.scene)?;
    if let Some(seed) = config.seed {
        manifest.seed = seed;
    }
    let sketch: Option<SketchSubmission> = config.sketch.as_deref().map(parse).transpose()?;
    let loaded = config.load_panel.as_deref().map(read).transpose()?;
    if config.frame_every == 0 {
        return Err(ServiceError::Malformed("--frame-every must be at least 1".into()).into());
    }

    let manager = SessionManager::new(config.provider.pipeline()?);
    let session = manager.create_session(manifest.clone())?;

    if let Some(document) = loaded {
        session.run(move |s| s.load_panel(&document))??;
    }

    let intent = match &config.prompt {
        Some(prompt) => {
            let request = IntentRequest {
                prompt: prompt.clone(),
                sketch,
            };
            Some(match session.run(move |s| s.submit_intent(request))?? {
                IntentOutcome::NewSystem {
                    decision, system_type, ..
                } => IntentSummary::NewSystem {
                    reason: decision.reason,
                    system_type,
                },
                IntentOutcome::Panel { decision, panel, engine } => IntentSummary::Panel {
                    reason: decision.reason,
                    panel_name: panel.panel_name.clone(),
                    concepts: panel.roots.clone(),
                    engine,
                },
            })
        }
        None => None,
    };

    let mut sets = Vec::new();
    for (node, value) in &config.sets {
        let (n, v) = (node.clone(), *value);
        let update = session.run(move |s| s.update_control(&n, ControlAction::Set { value: v }))??;
        sets.push(SetSummary {
            node: node.clone(),
            value: *value,
            changed: update.values.len(),
            engine: update.engine,
        });
    }

    let (steps, dt, every) = (config.steps, config.dt, config.frame_every);
    let frames: Vec<(u64, String)> = session.run(move |s| {
        let mut out = Vec::new();
        for i in 1..=steps {
            let snap = s.step(1, dt);
            if i % every == 0 || i == steps {
                out.push((snap.frame, snap.to_json()));
            }
        }
        out
    })?;

    let mut entries = Vec::new();
    if let Some(dir) = &config.dump_frames {
        for (frame, json) in &frames {
            let file = format!("frame_{frame:06}.json");
            write(&dir.join(&file), json)?;
            entries.push(FrameEntry {
                frame: *frame,
                file,
                sha256: sha256_hex(json),
            });
        }
    }

    if let Some(path) = &config.save_panel {
        let document = session.run(|s| s.save_panel())??;
        write(path, &document)?;
    }

    let catalog = manager.pipeline().catalog().clone();
    let view = session.view();
    let parameters = session.run(move |s| s.system.current_values(&catalog))?;
    let report = RunReport {
        template: manifest.template.clone(),
        seed: manifest.seed,
        prompt: config.prompt.clone(),
        intent,
        palette: view.palette.clone(),
        sets,
        system_type: view.system_type.clone(),
        steps,
        dt,
        final_frame: view.snapshot.frame,
        particle_count: view.snapshot.particle_count,
        metrics: view.snapshot.metrics.clone(),
        frames: entries,
        parameters,
    };
    if let Some(dir) = &config.dump_frames {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        write(&dir.join("run.json"), &text)?;
    }
    manager.close_session(session.id())?;
    Ok(report)
}
