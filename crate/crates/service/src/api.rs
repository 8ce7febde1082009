//! HTTP routes and the generation stream.
//!
//! | Method | Path | Body / reply |
//! |---|---|---|
//! | GET | `/health` | model hash, bone count |
//! | GET, POST | `/sessions` | list / create ([`CreateSession`]) |
//! | GET, PATCH, DELETE | `/sessions/{id}` | session record ([`UpdateSession`] for PATCH) |
//! | POST | `/sessions/{id}/generate` | [`TransitionRequest`] in, [`TransitionRecord`] out |
//! | GET (WebSocket) | `/sessions/{id}/stream` | request as first text message, then [`StreamMessage`]s |
//! | GET | `/clips` | [`ClipInfo`] list |
//! | GET | `/clips/{name}/frames/{frame}` | [`PoseJson`] |
//! | POST | `/paths/smooth` | [`SmoothPathRequest`] in, [`SmoothPathResponse`] out |
//! | GET | `/transitions/{id}` | [`TransitionRecord`] |
//! | GET | `/transitions/{id}/export?format=bvh\|json` | file |

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::mpsc;

use crate::error::ApiError;
use crate::generate::{self, GenerationFailure};
use crate::state::AppState;
use crate::types::{
    ClipInfo, CreateSession, PoseJson, Session, SmoothPathRequest, SmoothPathResponse, StreamMessage, TransitionRecord,
    TransitionRequest, UpdateSession,
};

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session).patch(update_session).delete(delete_session))
        .route("/sessions/{id}/generate", post(generate_once))
        .route("/sessions/{id}/stream", get(stream))
        .route("/clips", get(list_clips))
        .route("/clips/{name}/frames/{frame}", get(clip_frame))
        .route("/paths/smooth", post(smooth_path))
        .route("/transitions/{id}", get(get_transition))
        .route("/transitions/{id}/export", get(export))
        .with_state(state)
}

async fn health(State(s): Shared) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "model_hash": s.model_hash, "bones": s.skeleton.len(), "clips": s.clips.len() }))
}

async fn list_sessions(State(s): Shared) -> Json<Vec<Session>> {
    Json(s.store().sessions())
}

async fn create_session(State(s): Shared, body: Option<Json<CreateSession>>) -> Result<(StatusCode, Json<Session>), ApiError> {
    let req = body.map(|b| b.0).unwrap_or_default();
    let session = s.store().create_session(&s.model_hash, req)?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn get_session(State(s): Shared, Path(id): Path<String>) -> Result<Json<Session>, ApiError> {
    Ok(Json(s.store().session(&id)?.clone()))
}

async fn update_session(State(s): Shared, Path(id): Path<String>, Json(u): Json<UpdateSession>) -> Result<Json<Session>, ApiError> {
    Ok(Json(s.store().update_session(&id, u)?))
}

async fn delete_session(State(s): Shared, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if s.is_busy(&id) {
        return Err(ApiError::busy(&id));
    }
    s.store().delete_session(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_clips(State(s): Shared) -> Json<Vec<ClipInfo>> {
    Json(
        s.clips
            .values()
            .map(|c| ClipInfo { name: c.name.clone(), frames: c.len(), fps: c.fps, subject: c.subject, duration: c.duration() })
            .collect(),
    )
}

async fn clip_frame(State(s): Shared, Path((name, frame)): Path<(String, usize)>) -> Result<Json<PoseJson>, ApiError> {
    let c = s.clips.get(&name).ok_or_else(|| ApiError::not_found("clip", &name))?;
    let pose = c.frames.get(frame).ok_or_else(|| ApiError::not_found("frame", &format!("{name}:{frame}")))?;
    Ok(Json(PoseJson::from(pose)))
}

async fn smooth_path(Json(req): Json<SmoothPathRequest>) -> Result<Json<SmoothPathResponse>, ApiError> {
    let origin = req.origin.as_ref().map(Into::into).unwrap_or_default();
    let path = req.path.build(&origin, req.duration)?;
    let frames = ((path.end_time() * inbetween::motion::LAFAN1_FPS) - 1e-9).ceil().max(1.0) as usize;
    Ok(Json(SmoothPathResponse { control_points: path.control_points(), samples: path.sample(frames, inbetween::motion::LAFAN1_FPS) }))
}

async fn get_transition(State(s): Shared, Path(id): Path<String>) -> Result<Json<TransitionRecord>, ApiError> {
    Ok(Json(s.store().transition(&id)?.clone()))
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default = "default_format")]
    format: String,
}

fn default_format() -> String {
    "json".into()
}

async fn export(State(s): Shared, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let record = s.store().transition(&id)?.clone();
    let (body, mime, ext) = match q.format.as_str() {
        "json" => (serde_json::to_string(&record).map_err(|e| ApiError::internal(e.to_string()))?, "application/json", "json"),
        "bvh" => (generate::export_bvh(&record, &s)?, "text/plain; charset=utf-8", "bvh"),
        other => return Err(ApiError::invalid(format!("unknown export format `{other}`; use bvh or json"))),
    };
    let disposition = format!("attachment; filename=\"transition_{id}.{ext}\"");
    Ok(([(header::CONTENT_TYPE, mime.to_string()), (header::CONTENT_DISPOSITION, disposition)], body).into_response())
}

/// Generate and persist without streaming.
async fn generate_once(State(s): Shared, Path(id): Path<String>, Json(req): Json<TransitionRequest>) -> Result<Json<TransitionRecord>, ApiError> {
    s.store().session(&id)?;
    let guard = s.try_begin(&id).ok_or_else(|| ApiError::busy(&id))?;
    let state = s.clone();
    let record = tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let r = generate::run(&state, &id, &req, |_| true).map_err(|f| f.error)?;
        state.store().insert_transition(r.clone())?;
        Ok::<_, ApiError>(r)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(record))
}

async fn stream(State(s): Shared, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| run_stream(socket, s, id))
}

async fn send(socket: &mut WebSocket, msg: &StreamMessage) -> bool {
    match serde_json::to_string(msg) {
        Ok(text) => socket.send(Message::Text(text.into())).await.is_ok(),
        Err(_) => false,
    }
}

fn error_message(e: &ApiError, last_index: Option<usize>) -> StreamMessage {
    StreamMessage::Error { code: e.code.to_string(), message: e.message.clone(), last_index }
}

async fn first_request(socket: &mut WebSocket) -> Option<Result<TransitionRequest, ApiError>> {
    loop {
        match socket.recv().await? {
            Ok(Message::Text(t)) => {
                return Some(serde_json::from_str(t.as_str()).map_err(|e| ApiError::invalid(format!("bad request message: {e}"))));
            }
            Ok(Message::Binary(b)) => {
                return Some(serde_json::from_slice(&b).map_err(|e| ApiError::invalid(format!("bad request message: {e}"))));
            }
            Ok(Message::Close(_)) | Err(_) => return None,
            Ok(_) => continue,
        }
    }
}

async fn run_stream(mut socket: WebSocket, s: Arc<AppState>, id: String) {
    let req = match first_request(&mut socket).await {
        None => return,
        Some(Ok(r)) => r,
        Some(Err(e)) => {
            send(&mut socket, &error_message(&e, None)).await;
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
    };
    let checked = s.store().session(&id).map(|_| ()).and_then(|_| s.try_begin(&id).ok_or_else(|| ApiError::busy(&id)));
    let guard = match checked {
        Ok(g) => g,
        Err(e) => {
            send(&mut socket, &error_message(&e, None)).await;
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
    };

    let (tx, mut rx) = mpsc::unbounded_channel::<StreamMessage>();
    let state = s.clone();
    let session = id.clone();
    let worker = tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let frames_tx = tx.clone();
        let result = generate::run(&state, &session, &req, |f| frames_tx.send(StreamMessage::Frame(f.clone())).is_ok());
        let last = match result {
            Ok(record) => match state.store().insert_transition(record.clone()) {
                Ok(()) => StreamMessage::Complete { transition: record },
                Err(e) => error_message(&e, record.frames.len().checked_sub(1)),
            },
            Err(GenerationFailure { error, last_index }) => error_message(&error, last_index),
        };
        let _ = tx.send(last);
    });

    while let Some(msg) = rx.recv().await {
        if !send(&mut socket, &msg).await {
            // Client gone: dropping the receiver stops the worker at its next frame.
            break;
        }
    }
    drop(rx);
    let _ = worker.await;
    let _ = socket.send(Message::Close(None)).await;
}

