use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use liveness_core::data::DEFAULT_PADDING_FRACTION;
use liveness_core::{analyze, decode_image, ArchConfig, BBox, Label, LivenessNet};

use crate::detector::DetectorBinding;
use crate::error::{ApiError, ErrorCode};

const MAX_BODY_BYTES: usize = 16 * 1024 * 1024;

/// A model and the checksum of the file it came from.
#[derive(Debug)]
pub struct LoadedModel {
    pub net: LivenessNet,
    pub checksum: String,
}

/// Shared, read-only service state.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    model: Option<Arc<LoadedModel>>,
    detector: DetectorBinding,
    padding_fraction: f64,
    static_dir: Option<PathBuf>,
    started: Instant,
    http: reqwest::Client,
}

impl AppState {
    pub fn new(
        model: Option<LoadedModel>,
        detector: DetectorBinding,
        padding_fraction: f64,
        static_dir: Option<PathBuf>,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                model: model.map(Arc::new),
                detector,
                padding_fraction,
                static_dir,
                started: Instant::now(),
                http: reqwest::Client::new(),
            }),
        }
    }

    pub fn model(&self) -> Option<&Arc<LoadedModel>> {
        self.inner.model.as_ref()
    }
}

/// Structured request body; `image_b64` holds PNG or JPEG bytes.
#[derive(Debug, Deserialize)]
pub struct JsonRequest {
    pub image_b64: String,
    #[serde(default)]
    pub bbox: Option<BBox>,
    #[serde(default)]
    pub padding_fraction: Option<f64>,
}

#[derive(Debug)]
struct LivenessRequest {
    image: Bytes,
    bbox: Option<BBox>,
    padding_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictResponse {
    pub label: Label,
    pub score: f64,
    pub bbox: BBox,
    pub latency_ms: f64,
    pub model_checksum: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub arch: ArchConfig,
    pub param_count: usize,
    pub threshold: f64,
    pub checksum: String,
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/v1/liveness", post(liveness))
        .route("/v1/health", get(health))
        .route("/v1/model", get(model_info));
    let app = match &state.inner.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder_index)),
    };
    app.layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn placeholder_index() -> Html<&'static str> {
    Html(
        "<!doctype html><title>liveness</title><p>Liveness service. \
         POST frames to <code>/v1/liveness</code>; see <code>/v1/health</code> and <code>/v1/model</code>.</p>",
    )
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError::new(ErrorCode::BadRequest, msg)
}

fn parse_bbox_field(text: &str) -> Result<BBox, ApiError> {
    let trimmed = text.trim();
    let parsed = if trimmed.starts_with('{') {
        serde_json::from_str::<BBox>(trimmed).map_err(|e| e.to_string())
    } else {
        trimmed.parse::<BBox>().map_err(|e| e.to_string())
    };
    let bbox = parsed.map_err(|e| ApiError::new(ErrorCode::BadBbox, e))?;
    bbox.validate()
        .map_err(|e| ApiError::new(ErrorCode::BadBbox, e.to_string()))?;
    Ok(bbox)
}

async fn read_multipart(mut form: Multipart) -> Result<LivenessRequest, ApiError> {
    let (mut image, mut bbox, mut padding_fraction) = (None, None, None);
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| bad_request(format!("malformed multipart body: {e}")))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let data = field
            .bytes()
            .await
            .map_err(|e| bad_request(format!("could not read part {name:?}: {e}")))?;
        match name.as_str() {
            "image" => image = Some(data),
            "bbox" => bbox = Some(parse_bbox_field(&String::from_utf8_lossy(&data))?),
            "padding_fraction" => {
                let text = String::from_utf8_lossy(&data);
                padding_fraction = Some(
                    text.trim()
                        .parse::<f64>()
                        .map_err(|_| bad_request(format!("padding_fraction {text:?} is not a number")))?,
                );
            }
            _ => {}
        }
    }
    Ok(LivenessRequest {
        image: image.ok_or_else(|| ApiError::new(ErrorCode::BadImage, "multipart body has no `image` part"))?,
        bbox,
        padding_fraction,
    })
}

async fn read_request(req: Request) -> Result<LivenessRequest, ApiError> {
    let content_type = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_ascii_lowercase();
    if content_type.starts_with("multipart/form-data") {
        let form = Multipart::from_request(req, &())
            .await
            .map_err(|e| bad_request(e.body_text()))?;
        return read_multipart(form).await;
    }
    let body = Bytes::from_request(req, &())
        .await
        .map_err(|e| bad_request(e.body_text()))?;
    let parsed: JsonRequest =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("invalid JSON body: {e}")))?;
    let image = base64::engine::general_purpose::STANDARD
        .decode(parsed.image_b64.trim())
        .map_err(|e| ApiError::new(ErrorCode::BadImage, format!("image_b64 is not base64: {e}")))?;
    if let Some(b) = parsed.bbox {
        b.validate()
            .map_err(|e| ApiError::new(ErrorCode::BadBbox, e.to_string()))?;
    }
    Ok(LivenessRequest {
        image: image.into(),
        bbox: parsed.bbox,
        padding_fraction: parsed.padding_fraction,
    })
}

async fn liveness(State(state): State<AppState>, req: Request) -> Result<Json<VerdictResponse>, ApiError> {
    let model = state
        .model()
        .cloned()
        .ok_or_else(|| ApiError::new(ErrorCode::ModelUnavailable, "no model loaded"))?;
    let request = read_request(req).await?;
    let padding = request.padding_fraction.unwrap_or(state.inner.padding_fraction);
    if !padding.is_finite() || padding < 0.0 {
        return Err(bad_request(format!("padding_fraction {padding} must be non-negative")));
    }

    let started = Instant::now();
    let image = request.image.clone();
    let frame = tokio::task::spawn_blocking(move || decode_image(&image))
        .await
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))??;
    let bbox = match request.bbox {
        Some(b) => b,
        None => {
            state
                .inner
                .detector
                .locate(&state.inner.http, &request.image, frame.width(), frame.height())
                .await?
        }
    };
    let net = Arc::clone(&model);
    let verdict = tokio::task::spawn_blocking(move || analyze(&net.net, &frame, bbox, padding, None))
        .await
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))??;
    let latency_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(Json(VerdictResponse {
        label: verdict.label,
        score: verdict.score,
        bbox: verdict.bbox,
        latency_ms,
        model_checksum: model.checksum.clone(),
    }))
}

async fn health(State(state): State<AppState>) -> Response {
    let uptime_s = state.inner.started.elapsed().as_secs_f64();
    match state.model() {
        Some(m) => Json(json!({ "status": "ok", "model_checksum": m.checksum, "uptime_s": uptime_s })).into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "degraded", "model_checksum": null, "uptime_s": uptime_s })),
        )
            .into_response(),
    }
}

async fn model_info(State(state): State<AppState>) -> Result<Json<ModelInfo>, ApiError> {
    let m = state
        .model()
        .ok_or_else(|| ApiError::new(ErrorCode::ModelUnavailable, "no model loaded"))?;
    Ok(Json(ModelInfo {
        arch: m.net.arch().clone(),
        param_count: m.net.param_count(),
        threshold: m.net.threshold,
        checksum: m.checksum.clone(),
    }))
}

/// Default crop padding for requests that do not override it.
pub fn default_padding() -> f64 {
    DEFAULT_PADDING_FRACTION
}
