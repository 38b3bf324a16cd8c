//! JSON-over-HTTP surface consumed by the web front end.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::error::ServiceError;
use crate::session::{ControlAction, IntentRequest, SceneManifest, SessionManager};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

type Result<T> = std::result::Result<T, ServiceError>;
type AppState = Arc<SessionManager>;

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(session_view).delete(close_session))
        .route("/sessions/{id}/scene", put(replace_scene))
        .route("/sessions/{id}/palette", get(palette))
        .route("/sessions/{id}/palette/refresh", post(refresh_palette))
        .route("/sessions/{id}/intent", post(intent))
        .route("/sessions/{id}/controls/{node}", post(control))
        .route("/sessions/{id}/panel", get(panel))
        .route("/sessions/{id}/panel/save", get(save_panel))
        .route("/sessions/{id}/panel/load", post(load_panel))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/stream", get(stream_frames))
        .with_state(manager)
}

async fn create_session(State(m): State<AppState>, Json(manifest): Json<SceneManifest>) -> Result<impl IntoResponse> {
    let handle = m.create_session(manifest)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": handle.id() }))))
}

async fn list_sessions(State(m): State<AppState>) -> Json<Value> {
    Json(json!({ "sessions": m.session_ids() }))
}

async fn session_view(State(m): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    let view = m.session(&id)?.view();
    Ok(Json(view.as_ref()).into_response())
}

async fn close_session(State(m): State<AppState>, Path(id): Path<String>) -> Result<StatusCode> {
    m.close_session(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn replace_scene(
    State(m): State<AppState>,
    Path(id): Path<String>,
    Json(manifest): Json<SceneManifest>,
) -> Result<Response> {
    let h = m.session(&id)?;
    h.run_async(move |s| s.replace_scene(manifest)).await??;
    let view = h.view();
    Ok(Json(view.as_ref()).into_response())
}

async fn palette(State(m): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    Ok(Json(m.session(&id)?.view().palette.clone()).into_response())
}

async fn refresh_palette(State(m): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    let status = m.session(&id)?.run_async(|s| s.generate_palette()).await?;
    Ok(Json(status).into_response())
}

async fn intent(
    State(m): State<AppState>,
    Path(id): Path<String>,
    Json(request): Json<IntentRequest>,
) -> Result<Response> {
    let outcome = m.session(&id)?.run_async(move |s| s.submit_intent(request)).await??;
    Ok(Json(outcome).into_response())
}

async fn control(
    State(m): State<AppState>,
    Path((id, node)): Path<(String, String)>,
    Json(action): Json<ControlAction>,
) -> Result<Response> {
    let update = m
        .session(&id)?
        .run_async(move |s| s.update_control(&node, action))
        .await??;
    Ok(Json(update).into_response())
}

async fn panel(State(m): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    let view = m.session(&id)?.view();
    let panel = view.panel.as_ref().ok_or(ServiceError::NoPanel)?;
    Ok(Json(panel).into_response())
}

async fn save_panel(State(m): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    let document = m.session(&id)?.run_async(|s| s.save_panel()).await??;
    Ok(([("content-type", "application/json")], document).into_response())
}

async fn load_panel(State(m): State<AppState>, Path(id): Path<String>, body: String) -> Result<Response> {
    let h = m.session(&id)?;
    h.run_async(move |s| s.load_panel(&body)).await??;
    let view = h.view();
    Ok(Json(view.as_ref()).into_response())
}

async fn snapshot(State(m): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    Ok(Json(m.session(&id)?.view().snapshot.clone()).into_response())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepRequest {
    #[serde(default = "one")]
    pub steps: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn one() -> usize {
    1
}

fn default_dt() -> f64 {
    1.0 / 60.0
}

/// Upper bound on steps per request.
const MAX_STEPS: usize = 10_000;

async fn step(State(m): State<AppState>, Path(id): Path<String>, Json(req): Json<StepRequest>) -> Result<Response> {
    if req.steps > MAX_STEPS || !(req.dt > 0.0 && req.dt.is_finite()) {
        return Err(ServiceError::Malformed(format!(
            "steps must be at most {MAX_STEPS} and dt positive"
        )));
    }
    let snap = m.session(&id)?.run_async(move |s| s.step(req.steps, req.dt)).await?;
    Ok(Json(snap).into_response())
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct StreamQuery {
    /// Drive the simulation at this rate while subscribed.
    pub fps: Option<f64>,
    pub dt: Option<f64>,
}

async fn stream_frames(
    State(m): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
) -> Result<Sse<impl Stream<Item = std::result::Result<Event, Infallible>>>> {
    let h = m.session(&id)?;
    let rx = h.subscribe()?;
    if let Some(fps) = q.fps {
        h.start_clock(fps, q.dt.unwrap_or(1.0 / fps))?;
    }
    let frames = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(snap) => {
                    let event = Event::default().event("frame").data(snap.to_json());
                    return Some((Ok(event), rx));
                }
                Err(RecvError::Lagged(n)) => tracing::debug!(skipped = n, "stream subscriber lagged"),
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(frames).keep_alive(KeepAlive::default()))
}
