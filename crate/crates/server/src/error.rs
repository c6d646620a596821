use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use citysolution_core::Error;
use serde_json::json;

/// HTTP status for every error code. Each code maps to exactly one status.
pub fn status_for(error: &Error) -> StatusCode {
    use Error::*;
    match error {
        Unauthenticated | TokenExpired | InvalidCredentials => StatusCode::UNAUTHORIZED,
        AccountInactive | AccountRemoved | PermissionDenied(_) => StatusCode::FORBIDDEN,
        NotFound(_) | UnknownCredential | FieldMismatch => StatusCode::NOT_FOUND,
        OutsideCountry { .. }
        | UnresolvableLocation
        | NoCoordinates
        | InvalidTransition { .. }
        | FakeLocked(_)
        | InvalidCategory(_)
        | InvalidTarget => StatusCode::UNPROCESSABLE_ENTITY,
        Conflict(_) | AlreadyExists(_) | AlreadyUsed | DuplicateCredential(_) | EmailInUse => {
            StatusCode::CONFLICT
        }
        InvalidImage(_)
        | InvalidLocation(_)
        | MalformedPayload(_)
        | InvalidPayloadField(_)
        | InvalidEmail
        | WeakPassword
        | InvalidRequest(_) => StatusCode::BAD_REQUEST,
        ModelUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        MissingKey(_) | Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

/// Attached to error responses so the localization layer can replace the
/// provisional English message.
#[derive(Debug, Clone)]
pub struct ErrorInfo {
    pub code: &'static str,
    pub message_key: String,
    pub detail: String,
}

#[derive(Debug)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

pub fn error_body(code: &str, message: &str) -> serde_json::Value {
    json!({ "error": { "code": code, "message": message } })
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let info = ErrorInfo {
            code: self.0.code(),
            message_key: self.0.message_key(),
            detail: self.0.to_string(),
        };
        let mut response = (status, Json(error_body(info.code, &info.detail))).into_response();
        response.extensions_mut().insert(info);
        response
    }
}
