use arena_core::StoreError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

use crate::API_SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Store(e) => match e {
                StoreError::NotFound(_) => StatusCode::NOT_FOUND,
                StoreError::Forbidden(_) => StatusCode::FORBIDDEN,
                StoreError::Conflict(_) => StatusCode::CONFLICT,
                StoreError::LeaseExpired(_) => StatusCode::GONE,
                StoreError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
                StoreError::InvalidInput(_) => StatusCode::BAD_REQUEST,
                StoreError::Io(_) | StoreError::Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            },
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::Unauthorized => "unauthorized",
            ApiError::BadRequest(_) => "badRequest",
            ApiError::Store(e) => match e {
                StoreError::NotFound(_) => "notFound",
                StoreError::Forbidden(_) => "forbidden",
                StoreError::Conflict(_) => "conflict",
                StoreError::LeaseExpired(_) => "leaseExpired",
                StoreError::Unprocessable(_) => "unprocessable",
                StoreError::InvalidInput(_) => "invalidInput",
                StoreError::Io(_) | StoreError::Corrupt { .. } => "internal",
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schemaVersion": API_SCHEMA_VERSION,
            "error": { "code": self.code(), "message": self.to_string() },
        });
        (self.status(), Json(body)).into_response()
    }
}
