use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use vwsn_core::{ErrorCode, ServiceError};

/// HTTP status for every error code. Exhaustive on purpose: a new code does
/// not compile until it has a status.
pub fn status_of(code: ErrorCode) -> StatusCode {
    use ErrorCode as C;
    match code {
        C::BadRequest | C::InvalidQuery => StatusCode::BAD_REQUEST,
        C::NotFound | C::UnknownNode | C::UnknownSchedule => StatusCode::NOT_FOUND,
        C::IllegalTransition | C::AlreadyFired | C::AlreadyCancelled | C::DuplicateNode => {
            StatusCode::CONFLICT
        }
        C::InvalidParams
        | C::UnsupportedCapability
        | C::IntervalOutOfRange
        | C::UnitUnsupported
        | C::UnsupportedPlatform
        | C::PastDue
        | C::InvalidConfig
        | C::CorruptSnapshot => StatusCode::UNPROCESSABLE_ENTITY,
        C::NoCandidateNode
        | C::NodeCapacity
        | C::NodeEnergy
        | C::NodeUnreachable
        | C::ProtocolError
        | C::TargetCapacity
        | C::TargetEnergy
        | C::QueueFull
        | C::SnapshotIo => StatusCode::SERVICE_UNAVAILABLE,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
        }
    }

    pub fn status(&self) -> StatusCode {
        status_of(self.code)
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            code: self.code.as_str(),
            message: &self.message,
        };
        (self.status(), Json(body)).into_response()
    }
}
