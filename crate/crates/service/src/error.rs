use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use vividmap_core::catalog::CatalogError;
use vividmap_core::render2d::RenderError;
use vividmap_core::scene3d::SceneError;
use vividmap_core::style::StyleError;
use vividmap_core::ParseError;

/// JSON error body: always `{code, message}`, optionally `errors`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub errors: Option<Box<Value>>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            errors: None,
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn validation(errors: &[ParseError]) -> Self {
        let list: Vec<Value> = errors
            .iter()
            .map(|e| {
                json!({
                    "code": e.code(),
                    "feature_index": e.feature_index(),
                    "reason": e.to_string(),
                })
            })
            .collect();
        let first = &errors[0];
        Self {
            status: StatusCode::BAD_REQUEST,
            code: first.code(),
            message: first.to_string(),
            errors: Some(Box::new(Value::Array(list))),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some(errors) = self.errors {
            body["errors"] = *errors;
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        let status = match &e {
            CatalogError::UnknownCategory(_) | CatalogError::UnknownFeature(_) => {
                StatusCode::NOT_FOUND
            }
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<StyleError> for ApiError {
    fn from(e: StyleError) -> Self {
        match &e {
            StyleError::AlphaOutOfRange(_) => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "alpha_out_of_range",
                e.to_string(),
            ),
            StyleError::UnknownCategory(_) => {
                ApiError::not_found("unknown_category", e.to_string())
            }
            StyleError::EmptyViewport | StyleError::MalformedViewport => {
                ApiError::bad_request("bad_viewport", e.to_string())
            }
        }
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::DegenerateBbox => ApiError::bad_request("degenerate_bbox", e.to_string()),
            RenderError::Style(s) => s.into(),
        }
    }
}

impl From<SceneError> for ApiError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Style(s) => s.into(),
            other => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "scene_error",
                other.to_string(),
            ),
        }
    }
}
