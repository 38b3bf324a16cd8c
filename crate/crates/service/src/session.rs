//! Sessions: one worker thread per session applies every mutation in
//! arrival order and publishes an immutable view after each.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, RwLock};
use std::thread;
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use steer_core::{Catalog, Level, PanelConfig, Snapshot, SyncEvent, SystemState, TemplateKind};
use steer_pipeline::context::{SceneObject, Sketch, Stroke};
use steer_pipeline::prompts::prompt_type_name;
use steer_pipeline::provider::Image;
use steer_pipeline::{
    assemble_panel, write_through, AddEditDecision, BrushDescriptor, BrushSpec, GenerationContext, Pipeline,
};
use tokio::sync::{broadcast, oneshot};

use crate::error::{ErrorBody, ServiceError};

/// Frames kept for slow stream subscribers before they start skipping.
const FRAME_BUFFER: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    /// Template kind, e.g. `fountain`.
    pub template: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot: Option<Image>,
}

impl SceneManifest {
    pub fn kind(&self) -> Result<TemplateKind, ServiceError> {
        self.template
            .parse()
            .map_err(|_| ServiceError::InvalidManifest(format!("unknown template `{}`", self.template)))
    }

    pub fn validate(&self) -> Result<TemplateKind, ServiceError> {
        for o in &self.objects {
            if o.position.iter().any(|x| !x.is_finite()) {
                return Err(ServiceError::InvalidManifest(format!("object `{}` has a non-finite position", o.name)));
            }
        }
        self.kind()
    }
}

/// Strokes drawn by the user; brushes are resolved against the palette.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SketchSubmission {
    pub strokes: Vec<Stroke>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay: Option<Image>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentRequest {
    pub prompt: String,
    #[serde(default)]
    pub sketch: Option<SketchSubmission>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PaletteStatus {
    Pending,
    Ready { brushes: Vec<BrushSpec> },
    Failed { error: ErrorBody },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum IntentOutcome {
    /// A new particle system replaced the active one.
    NewSystem {
        decision: AddEditDecision,
        system_type: String,
        palette: PaletteStatus,
    },
    /// A control panel was generated and its defaults applied.
    Panel {
        decision: AddEditDecision,
        panel: PanelConfig,
        engine: IndexMap<String, f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ControlAction {
    /// Raw value in the node's own range.
    Set { value: f64 },
    /// Normalized value in `[0, 1]`.
    SetNormalized { value: f64 },
    Preset { label: String },
    Lock { locked: bool },
    /// Marks the node as being dragged, so propagation leaves it alone.
    Interact { active: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeValue {
    pub value: f64,
    pub raw: f64,
}

/// Result of one accepted control update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlUpdate {
    /// Position of this update in the session's serial order.
    pub seq: u64,
    pub node: String,
    pub event: Option<SyncEvent>,
    /// Every changed node with its new normalized and raw value.
    pub values: IndexMap<String, NodeValue>,
    /// Parameters written to the engine.
    pub engine: IndexMap<String, f64>,
}

/// Committed state as seen by readers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub id: String,
    pub seq: u64,
    pub system_type: String,
    pub manifest: SceneManifest,
    pub snapshot: Snapshot,
    pub panel: Option<PanelConfig>,
    pub palette: PaletteStatus,
}

/// State owned by a session's worker.
pub struct SessionState {
    pub id: String,
    pub manifest: SceneManifest,
    pub system: SystemState,
    pub panel: Option<PanelConfig>,
    pub palette: PaletteStatus,
    /// Number of accepted mutations.
    pub seq: u64,
    pipeline: Pipeline,
    frames: broadcast::Sender<Arc<Snapshot>>,
}

impl SessionState {
    pub fn new(
        id: impl Into<String>,
        manifest: SceneManifest,
        pipeline: Pipeline,
        frames: broadcast::Sender<Arc<Snapshot>>,
    ) -> Result<Self, ServiceError> {
        let kind = manifest.validate()?;
        let system = SystemState::instantiate(kind, pipeline.catalog(), manifest.seed)?;
        Ok(SessionState {
            id: id.into(),
            manifest,
            system,
            panel: None,
            palette: PaletteStatus::Pending,
            seq: 0,
            pipeline,
            frames,
        })
    }

    fn catalog(&self) -> &Catalog {
        self.pipeline.catalog()
    }

    pub fn system_type(&self) -> &'static str {
        prompt_type_name(self.system.template_kind)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            seq: self.seq,
            system_type: self.system_type().to_string(),
            manifest: self.manifest.clone(),
            snapshot: self.system.snapshot(),
            panel: self.panel.clone(),
            palette: self.palette.clone(),
        }
    }

    fn context(&self, prompt: &str) -> GenerationContext {
        GenerationContext::from_state(&self.system, self.catalog(), prompt)
            .with_scene(self.manifest.objects.clone())
            .with_screenshot(self.manifest.screenshot.clone())
    }

    /// Generates a fresh palette; failures are recorded, not raised.
    pub fn generate_palette(&mut self) -> PaletteStatus {
        let ctx = self.context("");
        self.palette = match self.pipeline.generate_brushes(&ctx, &mut |_| {}) {
            Ok(brushes) => PaletteStatus::Ready { brushes },
            Err(e) => {
                tracing::warn!(session = %self.id, error = %e, "palette generation failed");
                PaletteStatus::Failed {
                    error: ServiceError::from(e).body(),
                }
            }
        };
        self.palette.clone()
    }

    /// Replaces the scene and its particle system; the panel is dropped.
    pub fn replace_scene(&mut self, manifest: SceneManifest) -> Result<(), ServiceError> {
        let kind = manifest.validate()?;
        self.system = SystemState::instantiate(kind, self.catalog(), manifest.seed)?;
        self.manifest = manifest;
        self.panel = None;
        self.seq += 1;
        self.generate_palette();
        Ok(())
    }

    fn resolve_sketch(&self, submission: SketchSubmission) -> Result<Sketch, ServiceError> {
        let palette: &[BrushSpec] = match &self.palette {
            PaletteStatus::Ready { brushes } => brushes,
            _ => &[],
        };
        let mut brushes = IndexMap::new();
        for s in &submission.strokes {
            if let Some(id) = s.brush {
                let b = palette
                    .iter()
                    .find(|b| b.brushid == id)
                    .ok_or(ServiceError::UnknownBrush(id))?;
                brushes.insert(
                    id,
                    BrushDescriptor {
                        color: b.color.clone(),
                        functionality: b.functionality.clone(),
                    },
                );
            }
        }
        Ok(Sketch {
            strokes: submission.strokes,
            brushes,
            overlay: submission.overlay,
        })
    }

    /// Decides between adding a system and editing the current one, then
    /// either swaps the template or generates, assembles and applies a panel.
    pub fn submit_intent(&mut self, request: IntentRequest) -> Result<IntentOutcome, ServiceError> {
        let sketch = request.sketch.map(|s| self.resolve_sketch(s)).transpose()?;
        let ctx = self.context(&request.prompt).with_sketch(sketch);
        let decision = self.pipeline.decide_add_or_edit(&ctx)?;
        if let Some(kind) = decision.particle_type.filter(|_| decision.should_add_particle) {
            self.system = SystemState::instantiate(kind, self.catalog(), self.manifest.seed)?;
            self.manifest.template = prompt_type_name(kind).to_string();
            self.panel = None;
            self.seq += 1;
            let palette = self.generate_palette();
            return Ok(IntentOutcome::NewSystem {
                decision,
                system_type: self.system_type().to_string(),
                palette,
            });
        }
        let generated = self.pipeline.generate_panel(&ctx)?;
        let panel = assemble_panel(&generated, &ctx.system_type, self.catalog())?;
        let written = write_through(&panel, &mut self.system, self.pipeline.catalog())?;
        self.panel = Some(panel.clone());
        self.seq += 1;
        Ok(IntentOutcome::Panel {
            decision,
            panel,
            engine: written.into_iter().collect(),
        })
    }

    /// Applies one control action through the tree and writes every changed
    /// technical value to the engine.
    pub fn update_control(&mut self, node: &str, action: ControlAction) -> Result<ControlUpdate, ServiceError> {
        let pipeline = self.pipeline.clone();
        let catalog = pipeline.catalog();
        let panel = self.panel.as_mut().ok_or(ServiceError::NoPanel)?;
        let target = panel.node(node)?;
        let event = match action {
            ControlAction::Set { value } => {
                let (lo, hi) = (target.range.lower(), target.range.upper());
                if !value.is_finite() || value < lo || value > hi {
                    return Err(ServiceError::OutOfRange {
                        node: node.to_string(),
                        value,
                        min: lo,
                        max: hi,
                    });
                }
                Some(panel.set_node_value(node, value)?)
            }
            ControlAction::SetNormalized { value } => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ServiceError::OutOfRange {
                        node: node.to_string(),
                        value,
                        min: 0.0,
                        max: 1.0,
                    });
                }
                Some(panel.set_normalized(node, value)?)
            }
            ControlAction::Preset { label } => Some(panel.apply_preset(node, &label)?),
            ControlAction::Lock { locked } => {
                panel.lock_node(node, locked)?;
                None
            }
            ControlAction::Interact { active } => {
                panel.nodes.get_mut(node).expect("checked above").interacting = active;
                None
            }
        };
        let mut values = IndexMap::new();
        let mut engine = IndexMap::new();
        if let Some(ev) = &event {
            for change in &ev.changes {
                let n = panel.node(&change.id)?;
                let raw = n.raw_value();
                values.insert(change.id.clone(), NodeValue { value: n.value, raw });
                if n.level == Level::Technical {
                    if let Some(param) = panel.bindings.get(&change.id) {
                        let v = catalog.clamp_to_range(param, raw).map_err(steer_core::EngineError::from)?;
                        self.system.apply_parameter(param, v, catalog)?;
                        engine.insert(param.clone(), v);
                    }
                }
            }
        }
        self.seq += 1;
        Ok(ControlUpdate {
            seq: self.seq,
            node: node.to_string(),
            event,
            values,
            engine,
        })
    }

    /// Advances the simulation, publishing each frame to subscribers.
    pub fn step(&mut self, steps: usize, dt: f64) -> Snapshot {
        for _ in 0..steps {
            self.system.step(dt);
            if self.frames.receiver_count() > 0 {
                let _ = self.frames.send(Arc::new(self.system.snapshot()));
            }
        }
        self.system.snapshot()
    }

    pub fn save_panel(&self) -> Result<String, ServiceError> {
        Ok(self.panel.as_ref().ok_or(ServiceError::NoPanel)?.to_json())
    }

    /// Installs a saved panel and writes its technical values to the engine.
    pub fn load_panel(&mut self, document: &str) -> Result<(), ServiceError> {
        let panel = PanelConfig::from_json(document)?;
        if panel.system_type != self.system_type() {
            return Err(ServiceError::PanelMismatch {
                panel: panel.system_type.clone(),
                session: self.system_type().to_string(),
            });
        }
        let problems = panel.check_invariants(self.catalog());
        if !problems.is_empty() {
            return Err(ServiceError::PanelMismatch {
                panel: problems.join("; "),
                session: self.system_type().to_string(),
            });
        }
        write_through(&panel, &mut self.system, self.pipeline.catalog())?;
        self.panel = Some(panel);
        self.seq += 1;
        Ok(())
    }
}

type Job = Box<dyn FnOnce(&mut SessionState) + Send>;

/// Shared handle to a running session.
pub struct SessionHandle {
    id: String,
    jobs: Mutex<Option<mpsc::Sender<Job>>>,
    view: Arc<RwLock<Arc<SessionView>>>,
    frames: Mutex<Option<broadcast::Sender<Arc<Snapshot>>>>,
    clock: Mutex<Option<Arc<AtomicBool>>>,
}

impl SessionHandle {
    fn spawn(state: SessionState, frames: broadcast::Sender<Arc<Snapshot>>) -> Arc<Self> {
        let (tx, rx) = mpsc::channel::<Job>();
        let view = Arc::new(RwLock::new(Arc::new(state.view())));
        let id = state.id.clone();
        thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || {
                let mut state = state;
                for job in rx {
                    job(&mut state);
                }
            })
            .expect("spawn session worker");
        Arc::new(SessionHandle {
            id,
            jobs: Mutex::new(Some(tx)),
            view,
            frames: Mutex::new(Some(frames)),
            clock: Mutex::new(None),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Last committed state.
    pub fn view(&self) -> Arc<SessionView> {
        Arc::clone(&self.view.read().expect("view lock"))
    }

    /// Queues `f` behind every earlier job.
    pub fn enqueue<R, F>(&self, f: F) -> Result<oneshot::Receiver<R>, ServiceError>
    where
        R: Send + 'static,
        F: FnOnce(&mut SessionState) -> R + Send + 'static,
    {
        let (tx, rx) = oneshot::channel();
        let view = Arc::clone(&self.view);
        let job: Job = Box::new(move |s| {
            let result = f(s);
            *view.write().expect("view lock") = Arc::new(s.view());
            let _ = tx.send(result);
        });
        let jobs = self.jobs.lock().expect("jobs lock");
        jobs.as_ref()
            .ok_or(ServiceError::Closed)?
            .send(job)
            .map_err(|_| ServiceError::Closed)?;
        Ok(rx)
    }

    /// Runs `f` on the worker and waits for it. Not for use inside an async
    /// runtime; see [`run_async`](Self::run_async).
    pub fn run<R, F>(&self, f: F) -> Result<R, ServiceError>
    where
        R: Send + 'static,
        F: FnOnce(&mut SessionState) -> R + Send + 'static,
    {
        self.enqueue(f)?.blocking_recv().map_err(|_| ServiceError::Closed)
    }

    pub async fn run_async<R, F>(&self, f: F) -> Result<R, ServiceError>
    where
        R: Send + 'static,
        F: FnOnce(&mut SessionState) -> R + Send + 'static,
    {
        self.enqueue(f)?.await.map_err(|_| ServiceError::Closed)
    }

    pub fn subscribe(&self) -> Result<broadcast::Receiver<Arc<Snapshot>>, ServiceError> {
        let frames = self.frames.lock().expect("frames lock");
        Ok(frames.as_ref().ok_or(ServiceError::Closed)?.subscribe())
    }

    fn subscribers(&self) -> usize {
        self.frames
            .lock()
            .expect("frames lock")
            .as_ref()
            .map_or(0, |f| f.receiver_count())
    }

    /// Steps the simulation `fps` times per second by `dt` until stopped,
    /// the session closes, or the last subscriber leaves. A clock that is
    /// already running is kept.
    pub fn start_clock(self: &Arc<Self>, fps: f64, dt: f64) -> Result<(), ServiceError> {
        if !(fps > 0.0 && fps.is_finite() && dt > 0.0 && dt.is_finite()) {
            return Err(ServiceError::Malformed("fps and dt must be positive".into()));
        }
        let mut clock = self.clock.lock().expect("clock lock");
        if clock.as_ref().is_some_and(|stop| !stop.load(Ordering::SeqCst)) {
            return Ok(());
        }
        let stop = Arc::new(AtomicBool::new(false));
        *clock = Some(Arc::clone(&stop));
        let handle = Arc::downgrade(self);
        let period = Duration::from_secs_f64(1.0 / fps);
        thread::spawn(move || loop {
            thread::sleep(period);
            let Some(h) = handle.upgrade() else { break };
            if stop.load(Ordering::SeqCst) || h.subscribers() == 0 {
                stop.store(true, Ordering::SeqCst);
                break;
            }
            match h.enqueue(move |s| s.step(1, dt)) {
                Ok(rx) => {
                    let _ = rx.blocking_recv();
                }
                Err(_) => break,
            }
        });
        Ok(())
    }

    pub fn stop_clock(&self) {
        if let Some(stop) = self.clock.lock().expect("clock lock").take() {
            stop.store(true, Ordering::SeqCst);
        }
    }

    /// Stops the worker after queued jobs finish and ends every stream.
    fn close(&self) {
        self.stop_clock();
        self.jobs.lock().expect("jobs lock").take();
        self.frames.lock().expect("frames lock").take();
    }
}

/// All live sessions over one pipeline.
pub struct SessionManager {
    pipeline: Pipeline,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    counter: AtomicU64,
}

impl SessionManager {
    pub fn new(pipeline: Pipeline) -> Self {
        SessionManager {
            pipeline,
            sessions: RwLock::new(HashMap::new()),
            counter: AtomicU64::new(0),
        }
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    /// Starts a session for `manifest` and queues palette generation.
    pub fn create_session(&self, manifest: SceneManifest) -> Result<Arc<SessionHandle>, ServiceError> {
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let id = format!("s{n}-{}", &uuid::Uuid::new_v4().simple().to_string()[..8]);
        let (frames, _) = broadcast::channel(FRAME_BUFFER);
        let state = SessionState::new(&id, manifest, self.pipeline.clone(), frames.clone())?;
        let handle = SessionHandle::spawn(state, frames);
        handle.enqueue(|s| {
            s.generate_palette();
        })?;
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(id, Arc::clone(&handle));
        Ok(handle)
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ServiceError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn close_session(&self, id: &str) -> Result<(), ServiceError> {
        let handle = self
            .sessions
            .write()
            .expect("sessions lock")
            .remove(id)
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))?;
        handle.close();
        Ok(())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("sessions lock").keys().cloned().collect();
        ids.sort();
        ids
    }
}
