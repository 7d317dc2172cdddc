use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::json;

use liveness_core::Error as CoreError;

/// Machine-readable error codes returned in `{"error": {"code", "message"}}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    BadImage,
    BadBbox,
    NoFace,
    DetectorUnavailable,
    ModelUnavailable,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest | ErrorCode::BadImage | ErrorCode::BadBbox => StatusCode::BAD_REQUEST,
            ErrorCode::NoFace => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::DetectorUnavailable => StatusCode::BAD_GATEWAY,
            ErrorCode::ModelUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::BadRequest => "bad_request",
            ErrorCode::BadImage => "bad_image",
            ErrorCode::BadBbox => "bad_bbox",
            ErrorCode::NoFace => "no_face",
            ErrorCode::DetectorUnavailable => "detector_unavailable",
            ErrorCode::ModelUnavailable => "model_unavailable",
            ErrorCode::Internal => "internal",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{}: {message}", code.as_str())]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::BadImage(_) | CoreError::Image(_) => ErrorCode::BadImage,
            CoreError::BBoxOutsideFrame(_) => ErrorCode::BadBbox,
            CoreError::Data(_) | CoreError::Config(_) => ErrorCode::BadRequest,
            _ => ErrorCode::Internal,
        };
        Self::new(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code.as_str(), "message": self.message } });
        (self.code.status(), Json(body)).into_response()
    }
}
