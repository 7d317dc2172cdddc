//! HTTP front end for the liveness model.
//!
//! * `POST /v1/liveness`: multipart with an `image` part (optional `bbox`
//!   as `x,y,w,h` and `padding_fraction` parts), or JSON
//!   `{"image_b64", "bbox"?: {x, y, w, h}, "padding_fraction"?}`.
//!   Answers `{label, score, bbox, latency_ms, model_checksum}`.
//! * `GET /v1/health`: `{status, model_checksum, uptime_s}`; 503 with
//!   `status: "degraded"` when no model is loaded.
//! * `GET /v1/model`: `{arch, param_count, threshold, checksum}`.
//! * Everything else is served from the static directory, if configured.
//!
//! Errors are `{"error": {"code", "message"}}`.

mod app;
mod detector;
mod error;

use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use tokio::net::TcpListener;

pub use app::{default_padding, router, AppState, JsonRequest, LoadedModel, ModelInfo, VerdictResponse};
pub use detector::{DetectorBinding, DEFAULT_DETECTOR_TIMEOUT};
pub use error::{ApiError, ErrorCode};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub model_path: Option<PathBuf>,
    pub detector: DetectorBinding,
    pub padding_fraction: f64,
    pub static_dir: Option<PathBuf>,
}

pub fn load_model(path: &Path) -> anyhow::Result<LoadedModel> {
    let (net, checksum) =
        liveness_core::weights::load_from_path(path).with_context(|| format!("loading model {}", path.display()))?;
    Ok(LoadedModel { net, checksum })
}

impl ServiceConfig {
    pub fn state(&self) -> anyhow::Result<AppState> {
        let model = self.model_path.as_deref().map(load_model).transpose()?;
        Ok(AppState::new(
            model,
            self.detector.clone(),
            self.padding_fraction,
            self.static_dir.clone(),
        ))
    }
}

/// Binds the configured address.
pub async fn bind(addr: SocketAddr) -> anyhow::Result<TcpListener> {
    TcpListener::bind(addr)
        .await
        .with_context(|| format!("could not bind {addr}"))
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .context("server error")
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
