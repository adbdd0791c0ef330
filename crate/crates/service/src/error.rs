use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use trends_core::Error;

/// JSON error body. Every core error maps to exactly one (status, code).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_query", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::Query(_) => (StatusCode::BAD_REQUEST, "malformed_query"),
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::InvalidCombination(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_combination"),
            Error::Contract(_) => (StatusCode::UNPROCESSABLE_ENTITY, "contract_violation"),
            Error::Domain(_) => (StatusCode::UNPROCESSABLE_ENTITY, "domain_error"),
            Error::Range { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_range"),
            Error::Refused(_) => (StatusCode::UNPROCESSABLE_ENTITY, "refused"),
            Error::State(_) => (StatusCode::SERVICE_UNAVAILABLE, "store_unavailable"),
            Error::Corrupt { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "store_corrupt"),
            Error::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "store_io"),
            Error::Config(_) => (StatusCode::INTERNAL_SERVER_ERROR, "config"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
