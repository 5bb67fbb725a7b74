//! JSON-over-HTTP access to a loaded bundle.
//!
//! | route          | response                         |
//! |----------------|----------------------------------|
//! | `GET /health`  | `{"status":"ok"}`                |
//! | `GET /model`   | [`ModelInfo`]                    |
//! | `POST /predict`| [`PredictResponse`] for a [`PredictRequest`] |
//! | anything else  | UI assets from the UI directory, else a JSON 404 |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::geometry::GridSummary;
use crate::rom::{min_max_mean, FieldSummary, RomBundle, Slice};
use crate::{Error, Result};

/// Upper bound on slices per request.
pub const MAX_SLICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub t_ambient: f64,
    /// Heat-transfer coefficient magnitude (W/(m²·K)).
    pub htc: f64,
    /// Station indices to return as 2D slices.
    #[serde(default)]
    pub slices: Vec<usize>,
}

/// Min, max and mean over every value of the returned slices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub t_ambient: f64,
    pub htc: f64,
    /// Statistics of the returned slices; `null` when none were requested.
    pub summary: Option<SliceSummary>,
    /// Whole-field statistics and outlet quantities.
    pub field: FieldSummary,
    /// Mean surface temperature per station.
    pub surface_means: Vec<f64>,
    pub slices: Vec<Slice>,
    pub extrapolation: bool,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub t_ambient: [f64; 2],
    pub htc: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleHashes {
    pub geometry: String,
    pub discretization: String,
    pub grid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub parameter_box: ParameterBox,
    pub modes: usize,
    pub stations: usize,
    pub station_z: Vec<f64>,
    pub t_inlet: f64,
    pub grid: GridSummary,
    pub hashes: BundleHashes,
    /// Gram eigenvalues, descending.
    pub energy_spectrum: Vec<f64>,
    pub cumulative_energy: Vec<f64>,
    pub warnings: Vec<String>,
    pub format_version: u32,
}

impl ModelInfo {
    pub fn of(bundle: &RomBundle) -> Self {
        let m = &bundle.meta;
        let spectrum = bundle.basis.energy_spectrum.clone();
        let total = bundle.basis.total_energy;
        let mut acc = 0.0;
        let cumulative = spectrum
            .iter()
            .map(|v| {
                acc += v;
                if total > 0.0 {
                    (acc / total).min(1.0)
                } else {
                    1.0
                }
            })
            .collect();
        ModelInfo {
            parameter_box: ParameterBox {
                t_ambient: m.plan.t_ambient,
                htc: m.plan.htc,
            },
            modes: bundle.modes(),
            stations: bundle.stations(),
            station_z: bundle.station_positions(),
            t_inlet: m.t_inlet,
            grid: m.grid.clone(),
            hashes: BundleHashes {
                geometry: m.geometry_hash.clone(),
                discretization: m.discretization_hash.clone(),
                grid: m.grid_hash.clone(),
            },
            energy_spectrum: spectrum,
            cumulative_energy: cumulative,
            warnings: m.warnings.clone(),
            format_version: m.format_version,
        }
    }
}

/// Answers a prediction request; errors are client errors.
pub fn handle_predict(bundle: &RomBundle, req: &PredictRequest) -> Result<PredictResponse> {
    let start = Instant::now();
    if req.slices.len() > MAX_SLICES {
        return Err(Error::Config(format!("at most {MAX_SLICES} slices per request")));
    }
    if let Some(&bad) = req.slices.iter().find(|&&s| s >= bundle.stations()) {
        return Err(Error::Config(format!(
            "slice {bad} out of range (stations 0..{})",
            bundle.stations()
        )));
    }
    let p = bundle.predict(req.t_ambient, req.htc)?;
    let slices = req
        .slices
        .iter()
        .map(|&s| bundle.slice(&p.field, s))
        .collect::<Result<Vec<_>>>()?;
    let summary = (!slices.is_empty()).then(|| {
        let (min, max, mean) = min_max_mean(slices.iter().flat_map(|s| s.values.iter().copied()));
        SliceSummary { min, max, mean }
    });
    Ok(PredictResponse {
        t_ambient: req.t_ambient,
        htc: req.htc,
        summary,
        field: p.summary,
        surface_means: bundle.surface_means(&p.field),
        slices,
        extrapolation: p.extrapolation,
        latency_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Clone)]
struct AppState {
    bundle: Arc<RomBundle>,
    info: Arc<ModelInfo>,
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn model(State(state): State<AppState>) -> Json<ModelInfo> {
    Json((*state.info).clone())
}

async fn predict(State(state): State<AppState>, body: Bytes) -> Response {
    let req: PredictRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, format!("invalid request: {e}")),
    };
    match handle_predict(&state.bundle, &req) {
        Ok(resp) => Json(resp).into_response(),
        Err(e @ Error::Config(_)) => error_response(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn not_found() -> Response {
    error_response(StatusCode::NOT_FOUND, "not found")
}

async fn index() -> Json<serde_json::Value> {
    Json(json!({
        "service": "calibrom",
        "endpoints": ["GET /health", "GET /model", "POST /predict"],
    }))
}

/// Routes for `bundle`. With `ui_dir`, unmatched paths are served from it.
pub fn router(bundle: Arc<RomBundle>, ui_dir: Option<PathBuf>) -> Router {
    let state = AppState {
        info: Arc::new(ModelInfo::of(&bundle)),
        bundle,
    };
    let api = Router::new()
        .route("/health", get(health))
        .route("/model", get(model))
        .route("/predict", post(predict))
        .with_state(state);
    match ui_dir {
        Some(dir) => {
            api.fallback_service(ServeDir::new(dir).not_found_service(get(not_found).post(not_found)))
        }
        None => api.route("/", get(index)).fallback(not_found),
    }
}

/// Serves until Ctrl-C.
pub async fn serve(bundle: RomBundle, addr: SocketAddr, ui_dir: Option<PathBuf>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("bind {addr}"), e))?;
    let local = listener.local_addr().map_err(|e| Error::io("listener", e))?;
    eprintln!("calibrom: serving on http://{local}");
    axum::serve(listener, router(Arc::new(bundle), ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io("http server", e))
}
