use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

use crate::schema::{ErrorBody, ErrorResponse};
use crate::API_VERSION;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mtloop_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An error response: status plus a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "a valid expert bearer token is required")
    }

    pub fn terms_not_accepted() -> Self {
        Self::new(StatusCode::FORBIDDEN, "terms_not_accepted", "the terms of use must be accepted first")
    }

    pub fn model_unavailable(name: &str) -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "model_unavailable", format!("{name} is not loaded"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<mtloop_core::Error> for ApiError {
    fn from(e: mtloop_core::Error) -> Self {
        use mtloop_core::Error as E;
        match e {
            E::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            E::Validation(_) | E::InvalidArgument(_) | E::ZeroLengthHypothesis => Self::bad_request(e.to_string()),
            other => {
                tracing::error!(error = %other, "request failed");
                Self::internal(other.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorResponse {
            v: API_VERSION,
            error: ErrorBody {
                code: self.code.to_owned(),
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}
