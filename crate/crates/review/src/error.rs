use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use misuse_core::review::ReviewError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing or unknown reviewer token")]
    Unauthorized,
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        match e {
            ReviewError::PrematureResolution { .. } => ApiError::Conflict(e.to_string()),
            ReviewError::InvalidRootCause(_) | ReviewError::UnknownValue { .. } => ApiError::Unprocessable(e.to_string()),
            ReviewError::Io { .. } | ReviewError::Corrupt { .. } => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let ApiError::Internal(msg) = &self {
            log::error!("{msg}");
        }
        (self.status(), Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}
