//! HTTP review API. Geometry is in image pixels, measurements in cm.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/studies` | study list |
//! | GET | `/api/studies/{id}/frames/{index}` | frame PNG |
//! | GET | `/api/studies/{id}/{phase}` | current session |
//! | POST | `/api/studies/{id}/{phase}/auto` | automatic run |
//! | GET, PUT | `/api/studies/{id}/{phase}/scanline` | read or replace the scanline |
//! | GET | `/api/studies/{id}/{phase}/amm.png` | current AMM image |
//! | POST | `/api/studies/{id}/{phase}/accept` | accept and persist |

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use lvam_core::amm::Phase;
use lvam_core::{Line, Outcome, Point, Scanline, Stage};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::bundle::{encode_png, read_json, write_json, LoadedStudy};
use crate::error::Error;
use crate::runner::RunOptions;

/// Largest |cos| between scanline and long axis still reported as perpendicular.
const PERPENDICULAR_TOLERANCE: f64 = 1e-9;

/// Persisted review state of one study phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub study: String,
    pub phase: Phase,
    /// Bumped by every run; `accept` must quote the current value.
    pub revision: u64,
    pub accepted: bool,
    pub result: Outcome,
}

struct Slot {
    /// Serializes mutations of this (study, phase).
    write: tokio::sync::Mutex<()>,
    current: RwLock<Option<Arc<SessionState>>>,
}

struct Inner {
    studies: BTreeMap<String, Arc<LoadedStudy>>,
    slots: BTreeMap<(String, Phase), Slot>,
    options: RunOptions,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Builds the service state, reloading accepted sessions from each bundle.
    pub fn new(studies: Vec<LoadedStudy>, options: RunOptions) -> Result<Self, Error> {
        options.validate()?;
        let mut map = BTreeMap::new();
        let mut slots = BTreeMap::new();
        for s in studies {
            for phase in Phase::ALL {
                let path = s.accepted_path(phase);
                let saved: Option<SessionState> = if path.is_file() { Some(read_json(&path)?) } else { None };
                slots.insert(
                    (s.id().to_string(), phase),
                    Slot { write: tokio::sync::Mutex::new(()), current: RwLock::new(saved.map(Arc::new)) },
                );
            }
            if map.insert(s.id().to_string(), Arc::new(s)).is_some() {
                return Err(Error::Config("duplicate study id".into()));
            }
        }
        Ok(Self(Arc::new(Inner { studies: map, slots, options })))
    }

    pub fn session(&self, study: &str, phase: Phase) -> Option<Arc<SessionState>> {
        self.0.slots.get(&(study.to_string(), phase)).and_then(|s| s.current.read().clone())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/studies", get(list_studies))
        .route("/api/studies/{id}/frames/{index}", get(frame_png))
        .route("/api/studies/{id}/{phase}", get(get_session))
        .route("/api/studies/{id}/{phase}/auto", post(run_auto))
        .route("/api/studies/{id}/{phase}/scanline", get(get_scanline).put(put_scanline))
        .route("/api/studies/{id}/{phase}/amm.png", get(amm_png))
        .route("/api/studies/{id}/{phase}/accept", post(accept))
        .with_state(state)
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Validation(String),
    Pipeline { stage: Option<Stage>, message: String },
    Stale { current: u64 },
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    current_revision: Option<u64>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(message) => {
                (StatusCode::NOT_FOUND, ErrorBody { error: "not_found", message, stage: None, current_revision: None })
            }
            ApiError::Validation(message) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                ErrorBody { error: "validation", message, stage: None, current_revision: None },
            ),
            ApiError::Pipeline { stage, message } => {
                (StatusCode::CONFLICT, ErrorBody { error: "pipeline_failure", message, stage, current_revision: None })
            }
            ApiError::Stale { current } => (
                StatusCode::CONFLICT,
                ErrorBody {
                    error: "stale_revision",
                    message: format!("session is at revision {current}"),
                    stage: None,
                    current_revision: Some(current),
                },
            ),
            ApiError::Internal(message) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                ErrorBody { error: "internal", message, stage: None, current_revision: None },
            ),
        };
        (status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Core(c) => ApiError::Pipeline { stage: c.stage(), message: c.to_string() },
            Error::Config(m) => ApiError::Pipeline { stage: None, message: m },
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::Validation(r.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn lookup(state: &AppState, id: &str, phase: Option<&str>) -> ApiResult<(Arc<LoadedStudy>, Option<Phase>)> {
    let study = state.0.studies.get(id).cloned().ok_or_else(|| ApiError::NotFound(format!("unknown study {id}")))?;
    let phase =
        phase.map(|p| p.parse::<Phase>().map_err(|_| ApiError::NotFound(format!("unknown phase {p}")))).transpose()?;
    Ok((study, phase))
}

fn slot<'a>(state: &'a AppState, id: &str, phase: Phase) -> &'a Slot {
    state.0.slots.get(&(id.to_string(), phase)).expect("slot per study phase")
}

fn current(state: &AppState, id: &str, phase: Phase) -> ApiResult<Arc<SessionState>> {
    slot(state, id, phase).current.read().clone().ok_or_else(|| {
        ApiError::NotFound(format!("no session for {id}/{phase}; POST .../auto or PUT .../scanline first"))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub id: String,
    pub pixel_spacing_cm: f64,
    pub height_px: usize,
    pub width_px: usize,
    pub frames: usize,
    pub anchor_ed: usize,
    pub anchor_es: usize,
    pub accepted: BTreeMap<Phase, bool>,
}

async fn list_studies(State(state): State<AppState>) -> Json<Vec<StudySummary>> {
    let list = state
        .0
        .studies
        .values()
        .map(|s| {
            let m = &s.manifest;
            StudySummary {
                id: m.id.clone(),
                pixel_spacing_cm: m.pixel_spacing_cm,
                height_px: m.height,
                width_px: m.width,
                frames: m.frames.len(),
                anchor_ed: m.anchor_ed,
                anchor_es: m.anchor_es,
                accepted: Phase::ALL
                    .into_iter()
                    .map(|p| (p, state.session(s.id(), p).is_some_and(|x| x.accepted)))
                    .collect(),
            }
        })
        .collect();
    Json(list)
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn frame_png(State(state): State<AppState>, Path((id, index)): Path<(String, usize)>) -> ApiResult<Response> {
    let (study, _) = lookup(&state, &id, None)?;
    let path = study.frame_path(index).ok_or_else(|| ApiError::NotFound(format!("{id} has no frame {index}")))?;
    let bytes = tokio::fs::read(&path).await.map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
    Ok(png(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementsCm {
    pub ivs: f64,
    pub lvid: f64,
    pub lvpw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmmView {
    pub samples: usize,
    pub frames: usize,
    pub sample_spacing_px: f64,
    pub anchor_column: usize,
    pub png_base64: String,
}

/// Session as returned to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub study: String,
    pub phase: Phase,
    pub revision: u64,
    pub accepted: bool,
    pub manual_override: bool,
    /// Whether the scanline is perpendicular to the fitted long axis.
    pub perpendicular: Option<bool>,
    pub scanline_px: Scanline,
    pub long_axis_px: Option<Line>,
    pub contour_px: Option<lvam_core::Contour>,
    pub landmarks_px: [Point; 4],
    pub landmark_rows: Option<[f64; 4]>,
    pub measurements_cm: MeasurementsCm,
    pub amm: AmmView,
    pub detector: String,
    pub contour_source: Option<String>,
    pub units: BTreeMap<String, String>,
}

impl SessionView {
    fn of(s: &SessionState, anchor_column: usize) -> ApiResult<Self> {
        let r = &s.result;
        let png = encode_png(&r.amm.values).map_err(|e| ApiError::Internal(e.to_string()))?;
        let m = &r.measurements;
        Ok(Self {
            study: s.study.clone(),
            phase: s.phase,
            revision: s.revision,
            accepted: s.accepted,
            manual_override: r.provenance.manual_override,
            perpendicular: r
                .long_axis
                .map(|a| a.direction.dot(r.scanline.direction()).abs() <= PERPENDICULAR_TOLERANCE),
            scanline_px: r.scanline,
            long_axis_px: r.long_axis,
            contour_px: r.contour.clone(),
            landmarks_px: m.landmarks,
            landmark_rows: m.landmark_rows,
            measurements_cm: MeasurementsCm { ivs: m.ivs, lvid: m.lvid, lvpw: m.lvpw },
            amm: AmmView {
                samples: r.amm.samples(),
                frames: r.amm.frames(),
                sample_spacing_px: r.amm.sample_spacing,
                anchor_column,
                png_base64: base64::engine::general_purpose::STANDARD.encode(png),
            },
            detector: r.provenance.detector.clone(),
            contour_source: r.provenance.contour_source.clone(),
            units: [("geometry", "px"), ("measurements", "cm"), ("amm_rows", "samples")]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        })
    }
}

fn view(study: &LoadedStudy, s: &SessionState) -> ApiResult<Json<SessionView>> {
    let anchor = study.study.anchor(s.phase).map_err(|e| ApiError::Internal(e.to_string()))?;
    SessionView::of(s, anchor).map(Json)
}

async fn get_session(
    State(state): State<AppState>,
    Path((id, phase)): Path<(String, String)>,
) -> ApiResult<Json<SessionView>> {
    let (study, phase) = lookup(&state, &id, Some(&phase))?;
    let s = current(&state, &id, phase.expect("phase given"))?;
    view(&study, &s)
}

/// Runs `f` off the async runtime and installs its result as the next revision.
async fn mutate<F>(state: &AppState, study: Arc<LoadedStudy>, phase: Phase, f: F) -> ApiResult<Json<SessionView>>
where
    F: FnOnce(&LoadedStudy, &RunOptions, Option<&SessionState>) -> Result<Outcome, Error> + Send + 'static,
{
    let slot = slot(state, study.id(), phase);
    let _guard = slot.write.lock().await;
    let prev = slot.current.read().clone();
    let options = state.0.options.clone();
    let (study2, prev2) = (study.clone(), prev.clone());
    let result = tokio::task::spawn_blocking(move || f(&study2, &options, prev2.as_deref()))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let next = Arc::new(SessionState {
        study: study.id().to_string(),
        phase,
        revision: prev.map_or(1, |p| p.revision + 1),
        accepted: false,
        result,
    });
    *slot.current.write() = Some(next.clone());
    view(&study, &next)
}

async fn run_auto(
    State(state): State<AppState>,
    Path((id, phase)): Path<(String, String)>,
) -> ApiResult<Json<SessionView>> {
    let (study, phase) = lookup(&state, &id, Some(&phase))?;
    let phase = phase.expect("phase given");
    mutate(&state, study, phase, move |s, opts, _| opts.run(s, phase)).await
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanlineBody {
    pub p1: Point,
    pub p2: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanlineView {
    pub revision: u64,
    pub scanline_px: Scanline,
    pub length_px: f64,
    pub angle_deg: f64,
    pub manual_override: bool,
}

async fn get_scanline(
    State(state): State<AppState>,
    Path((id, phase)): Path<(String, String)>,
) -> ApiResult<Json<ScanlineView>> {
    let (_, phase) = lookup(&state, &id, Some(&phase))?;
    let s = current(&state, &id, phase.expect("phase given"))?;
    let sl = s.result.scanline;
    Ok(Json(ScanlineView {
        revision: s.revision,
        scanline_px: sl,
        length_px: sl.length(),
        angle_deg: sl.angle_deg(),
        manual_override: s.result.provenance.manual_override,
    }))
}

async fn put_scanline(
    State(state): State<AppState>,
    Path((id, phase)): Path<(String, String)>,
    body: Result<Json<ScanlineBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let (study, phase) = lookup(&state, &id, Some(&phase))?;
    let phase = phase.expect("phase given");
    let Json(body) = body?;
    let sl = Scanline { p1: body.p1, p2: body.p2 };
    sl.validate().map_err(|e| ApiError::Validation(e.to_string()))?;
    mutate(&state, study, phase, move |s, opts, prev| {
        let mut r = opts.run_with_scanline(s, phase, &sl)?;
        // Keep the automatic overlays for display.
        if let Some(p) = prev {
            r.contour = p.result.contour.clone();
            r.long_axis = p.result.long_axis;
        }
        Ok(r)
    })
    .await
}

async fn amm_png(State(state): State<AppState>, Path((id, phase)): Path<(String, String)>) -> ApiResult<Response> {
    let (_, phase) = lookup(&state, &id, Some(&phase))?;
    let s = current(&state, &id, phase.expect("phase given"))?;
    let bytes = encode_png(&s.result.amm.values).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(png(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptBody {
    pub revision: u64,
}

async fn accept(
    State(state): State<AppState>,
    Path((id, phase)): Path<(String, String)>,
    body: Result<Json<AcceptBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let (study, phase) = lookup(&state, &id, Some(&phase))?;
    let phase = phase.expect("phase given");
    let Json(body) = body?;
    let slot = slot(&state, &id, phase);
    let _guard = slot.write.lock().await;
    let cur = current(&state, &id, phase)?;
    if cur.revision != body.revision {
        return Err(ApiError::Stale { current: cur.revision });
    }
    let next = Arc::new(SessionState { accepted: true, ..(*cur).clone() });
    let path = study.accepted_path(phase);
    let saved = next.clone();
    tokio::task::spawn_blocking(move || write_json(&path, &*saved))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    *slot.current.write() = Some(next.clone());
    view(&study, &next)
}
