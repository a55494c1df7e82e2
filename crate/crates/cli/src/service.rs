//! HTTP service over a loaded plan: metadata, per-view compilation and
//! step sheets.

use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use h2s_core::plan::Plan;
use h2s_core::projective::{Ability, Camera};
use h2s_core::render::{export_tutorial, render_step};
use h2s_core::tutorial::{compile, Tutorial};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use crate::cache::LruCache;

pub const SESSION_HEADER: &str = "x-h2s-session";
pub const CACHE_CAPACITY: usize = 64;
/// Camera quantization step, relative to the model diagonal for points
/// and absolute for unit vectors and degrees.
pub const CAMERA_QUANTUM: f64 = 1e-4;

struct Compiled {
    tutorial: Tutorial,
    document: String,
}

pub struct AppState {
    plan: Plan,
    cache: Mutex<LruCache<SessionKey, Arc<Compiled>>>,
}

impl AppState {
    pub fn new(plan: Plan) -> Self {
        AppState {
            plan,
            cache: Mutex::new(LruCache::new(CACHE_CAPACITY)),
        }
    }
}

/// Quantized camera plus ability; doubles as the session token.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SessionKey {
    ability: Ability,
    values: [i64; 10],
    width: u32,
    height: u32,
}

fn ability_code(a: Ability) -> char {
    match a {
        Ability::Novice => 'n',
        Ability::Apprentice => 'a',
        Ability::Master => 'm',
    }
}

impl SessionKey {
    pub fn new(camera: &Camera, ability: Ability, diagonal: f64) -> SessionKey {
        let step = CAMERA_QUANTUM * diagonal;
        let q = |v: f64, s: f64| (v / s).round() as i64;
        let up_len = camera.up.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mut values = [0i64; 10];
        for k in 0..3 {
            values[k] = q(camera.eye[k], step);
            values[3 + k] = q(camera.target[k], step);
            values[6 + k] = q(camera.up[k] / up_len, CAMERA_QUANTUM);
        }
        values[9] = q(camera.vertical_fov, CAMERA_QUANTUM);
        SessionKey {
            ability,
            values,
            width: camera.width,
            height: camera.height,
        }
    }

    /// Camera at the quantized grid point; compiling from it keeps
    /// responses a function of the key alone.
    pub fn camera(&self, diagonal: f64) -> Camera {
        let step = CAMERA_QUANTUM * diagonal;
        let v = |k: usize, s: f64| self.values[k] as f64 * s;
        Camera {
            eye: [v(0, step), v(1, step), v(2, step)],
            target: [v(3, step), v(4, step), v(5, step)],
            up: [v(6, CAMERA_QUANTUM), v(7, CAMERA_QUANTUM), v(8, CAMERA_QUANTUM)],
            vertical_fov: v(9, CAMERA_QUANTUM),
            width: self.width,
            height: self.height,
        }
    }

    pub fn ability(&self) -> Ability {
        self.ability
    }

    pub fn token(&self) -> String {
        let nums: Vec<String> = self.values.iter().map(i64::to_string).collect();
        format!("{}_{}x{}_{}", ability_code(self.ability), self.width, self.height, nums.join("_"))
    }

    pub fn parse(token: &str) -> Option<SessionKey> {
        let mut parts = token.split('_');
        let ability = match parts.next()? {
            "n" => Ability::Novice,
            "a" => Ability::Apprentice,
            "m" => Ability::Master,
            _ => return None,
        };
        let (w, h) = parts.next()?.split_once('x')?;
        let mut values = [0i64; 10];
        for v in values.iter_mut() {
            *v = parts.next()?.parse().ok()?;
        }
        if parts.next().is_some() {
            return None;
        }
        Some(SessionKey {
            ability,
            values,
            width: w.parse().ok()?,
            height: h.parse().ok()?,
        })
    }
}

#[derive(Debug)]
pub enum ApiError {
    Malformed(String),
    DegenerateCamera(String),
    NotFound(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, message) = match self {
            ApiError::Malformed(m) => (StatusCode::BAD_REQUEST, "malformed_request", m),
            ApiError::DegenerateCamera(m) => (StatusCode::UNPROCESSABLE_ENTITY, "degenerate_camera", m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, "not_found", m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
        };
        (status, Json(json!({ "error": { "kind": kind, "message": message } }))).into_response()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompileRequest {
    camera: Camera,
    ability: String,
}

type Shared = Arc<AppState>;

fn compiled(state: &AppState, key: &SessionKey) -> Result<Arc<Compiled>, ApiError> {
    if let Some(hit) = state.cache.lock().expect("cache lock").get(key) {
        return Ok(hit);
    }
    let camera = key.camera(state.plan.model.bbox_diagonal);
    camera.validate().map_err(|e| ApiError::DegenerateCamera(e.to_string()))?;
    let tutorial = compile(&state.plan, &camera, key.ability()).map_err(|e| match e {
        h2s_core::tutorial::TutorialError::Camera(e) => ApiError::DegenerateCamera(e.to_string()),
        other => ApiError::Internal(other.to_string()),
    })?;
    let document = export_tutorial(&tutorial);
    let entry = Arc::new(Compiled { tutorial, document });
    state.cache.lock().expect("cache lock").insert(key.clone(), entry.clone());
    Ok(entry)
}

async fn meta(State(state): State<Shared>) -> Json<serde_json::Value> {
    let plan = &state.plan;
    let parts: Vec<serde_json::Value> = plan
        .primitives
        .iter()
        .map(|p| {
            let chosen = plan.chosen(p.part_id);
            json!({
                "id": p.part_id,
                "name": plan.part_name(p.part_id),
                "kind": p.kind,
                "candidate": chosen.map(|c| c.id),
                "level": chosen.map(|c| c.level),
            })
        })
        .collect();
    Json(json!({
        "version": plan.version,
        "config_hash": plan.config_hash,
        "up_axis": plan.model.up_axis,
        "bbox_diagonal": plan.model.bbox_diagonal,
        "segments": plan.model.segments.len(),
        "triangles": plan.model.triangle_count(),
        "candidates": plan.candidates.candidates.len(),
        "objective": plan.selection.objective,
        "optimal": plan.selection.optimal,
        "order": plan.selection.order,
        "parts": parts,
        "relations": plan.relations,
    }))
}

async fn compile_view(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: CompileRequest = serde_json::from_slice(&body).map_err(|e| ApiError::Malformed(e.to_string()))?;
    let ability: Ability = req.ability.parse().map_err(ApiError::Malformed)?;
    req.camera
        .validate()
        .map_err(|e| ApiError::DegenerateCamera(e.to_string()))?;
    let key = SessionKey::new(&req.camera, ability, state.plan.model.bbox_diagonal);
    let entry = compiled(&state, &key)?;
    let token = HeaderValue::from_str(&key.token()).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
            (HeaderName::from_static(SESSION_HEADER), token),
        ],
        entry.document.clone(),
    )
        .into_response())
}

#[derive(Deserialize)]
struct StepQuery {
    session: Option<String>,
}

async fn step_sheet(
    State(state): State<Shared>,
    Path(file): Path<String>,
    Query(q): Query<StepQuery>,
) -> Result<Response, ApiError> {
    let index: usize = file
        .strip_suffix(".svg")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ApiError::NotFound(format!("no step sheet named {file}")))?;
    let token = q.session.ok_or_else(|| ApiError::Malformed("missing session parameter".into()))?;
    let key = SessionKey::parse(&token).ok_or_else(|| ApiError::Malformed(format!("bad session {token}")))?;
    let entry = compiled(&state, &key)?;
    let sheet = render_step(&entry.tutorial, index).map_err(|e| ApiError::NotFound(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], sheet.svg).into_response())
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers(Any)
        .expose_headers([HeaderName::from_static(SESSION_HEADER)]);
    Router::new()
        .route("/meta", get(meta))
        .route("/compile", post(compile_view))
        .route("/step/{file}", get(step_sheet))
        .layer(cors)
        .with_state(Arc::new(state))
}

pub async fn serve(state: AppState, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state)).await?;
    Ok(())
}
