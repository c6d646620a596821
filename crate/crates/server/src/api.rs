//! HTTP routes. Handlers translate JSON to platform calls and back; all
//! rules live in the platform.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::header::{ACCEPT_LANGUAGE, AUTHORIZATION, CONTENT_LANGUAGE, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::{HeaderMap, HeaderValue, StatusCode, Uri};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use citysolution_core::accounts::{AccountView, UserAccount};
use citysolution_core::complaints::ComplaintFilter;
use citysolution_core::geo::GeoPoint;
use citysolution_core::notifications::Notification;
use citysolution_core::provisioning::CredentialPayload;
use citysolution_core::stats::{self, NATIONWIDE};
use citysolution_core::{Category, Error, Language, Platform, Status};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{error_body, ApiError, ApiResult, ErrorInfo};

/// Largest accepted decoded image.
pub const MAX_IMAGE_BYTES: usize = 5 * 1024 * 1024;
/// Request body cap: a base64 image of `MAX_IMAGE_BYTES` plus the other fields.
pub const MAX_BODY_BYTES: usize = MAX_IMAGE_BYTES / 3 * 4 + 64 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub platform: Arc<Platform>,
}

impl AppState {
    pub fn new(platform: Arc<Platform>) -> Self {
        Self { platform }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/register/citizen", post(register_citizen))
        .route("/api/verify-email", post(verify_email))
        .route("/api/register/employee", post(register_employee))
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route("/api/me", get(me))
        .route(
            "/api/complaints",
            post(submit_complaint).get(list_complaints),
        )
        .route("/api/complaints/{id}", get(get_complaint))
        .route("/api/complaints/{id}/status", post(transition_status))
        .route("/api/complaints/{id}/category", post(reassign_category))
        .route("/api/complaints/{id}/fake", post(mark_fake))
        .route("/api/complaints/{id}/feedback", post(send_feedback))
        .route("/api/complaints/{id}/events", get(complaint_events))
        .route("/api/complaints/{id}/image", get(complaint_image))
        .route("/api/complaints/{id}/map-link", get(map_link))
        .route("/api/complaints/{id}/contact-link", get(contact_link))
        .route("/api/stats/status", get(status_stats))
        .route("/api/stats/category", get(category_stats))
        .route("/api/notifications", get(list_notifications))
        .route("/api/notifications/{id}/read", post(mark_read))
        .route(
            "/api/admin/credentials",
            post(generate_credential).get(list_credentials),
        )
        .route("/api/admin/employees", get(list_employees))
        .route("/api/admin/employees/{id}", delete(remove_employee))
        .fallback(unknown_route)
        .layer(middleware::from_fn_with_state(
            state.clone(),
            localize_errors,
        ))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Runs a platform call on the blocking pool: password hashing,
/// classification and file-store writes all block.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Platform) -> citysolution_core::Result<T> + Send + 'static,
{
    let platform = state.platform.clone();
    tokio::task::spawn_blocking(move || f(&platform))
        .await
        .map_err(|e| Error::Internal(format!("worker failed: {e}")))?
        .map_err(ApiError)
}

// ---- extractors ----

fn bearer_token(headers: &HeaderMap) -> Option<&str> {
    let value = headers.get(AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme
        .eq_ignore_ascii_case("bearer")
        .then(|| token.trim())
        .filter(|t| !t.is_empty())
}

/// The authenticated account behind the bearer token.
pub struct Caller {
    pub account: UserAccount,
    pub token: String,
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = bearer_token(&parts.headers)
            .ok_or(Error::Unauthenticated)?
            .to_string();
        let (_, account) = state.platform.introspect(&token)?;
        Ok(Caller { account, token })
    }
}

fn requested_language(headers: &HeaderMap, uri: &Uri) -> Option<Language> {
    let from_query = uri.query().and_then(|q| {
        q.split('&')
            .filter_map(|pair| pair.split_once('='))
            .find(|(k, _)| *k == "lang")
            .and_then(|(_, v)| Language::parse_tag(v))
    });
    from_query.or_else(|| {
        headers
            .get(ACCEPT_LANGUAGE)
            .and_then(|v| v.to_str().ok())
            .and_then(Language::parse_tag)
    })
}

/// Request language, then the caller's preference, then the configured default.
fn resolve_language(state: &AppState, headers: &HeaderMap, uri: &Uri) -> Language {
    requested_language(headers, uri)
        .or_else(|| {
            let token = bearer_token(headers)?;
            let (_, account) = state.platform.introspect(token).ok()?;
            Some(account.language_pref)
        })
        .unwrap_or(state.platform.settings().default_language)
}

pub struct Lang(pub Language);

impl FromRequestParts<AppState> for Lang {
    type Rejection = std::convert::Infallible;

    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        Ok(Lang(resolve_language(state, &parts.headers, &parts.uri)))
    }
}

/// `Json` whose rejections use the service's error body.
pub struct ApiJson<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(ApiJson(value)),
            Err(rejection) => Err(json_rejection(rejection).into()),
        }
    }
}

fn json_rejection(rejection: JsonRejection) -> Error {
    if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE {
        Error::InvalidImage(format!("request body exceeds {MAX_BODY_BYTES} bytes"))
    } else {
        Error::InvalidRequest(rejection.body_text())
    }
}

/// Query string as a map; malformed strings are an InvalidRequest.
pub struct ApiQuery(pub HashMap<String, String>);

impl<S: Send + Sync> FromRequestParts<S> for ApiQuery {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Query::<HashMap<String, String>>::from_request_parts(parts, state)
            .await
            .map(|Query(q)| ApiQuery(q))
            .map_err(|e| Error::InvalidRequest(e.body_text()).into())
    }
}

impl ApiQuery {
    fn get(&self, key: &str) -> Option<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .filter(|v| !v.trim().is_empty())
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&self, key: &str) -> Result<Option<T>, Error> {
        self.get(key)
            .map(|v| v.parse().map_err(Error::InvalidRequest))
            .transpose()
    }
}

// ---- middleware ----

/// Replaces the English detail of error bodies with the catalog message
/// for the request language and tags every response with its language.
async fn localize_errors(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let lang = {
        let worker_state = state.clone();
        let (headers, uri) = (req.headers().clone(), req.uri().clone());
        tokio::task::spawn_blocking(move || resolve_language(&worker_state, &headers, &uri))
            .await
            .unwrap_or(state.platform.settings().default_language)
    };
    let mut response = next.run(req).await;
    if let Some(info) = response.extensions().get::<ErrorInfo>().cloned() {
        let message = state
            .platform
            .catalogs()
            .localize::<&str>(&info.message_key, lang, &[])
            .unwrap_or(info.detail);
        let status = response.status();
        response = (status, Json(error_body(info.code, &message))).into_response();
    }
    response
        .headers_mut()
        .insert(CONTENT_LANGUAGE, HeaderValue::from_static(lang.tag()));
    response
}

async fn unknown_route(uri: Uri) -> ApiError {
    Error::NotFound(format!("route {}", uri.path())).into()
}

// ---- accounts ----

#[derive(Deserialize)]
struct CitizenRegistration {
    email: String,
    password: String,
    #[serde(default)]
    display_name: String,
    language: Option<String>,
}

fn language_field(value: Option<&str>, fallback: Language) -> Result<Language, Error> {
    match value {
        Some(tag) => Language::parse_tag(tag)
            .ok_or_else(|| Error::InvalidRequest(format!("unsupported language {tag:?}"))),
        None => Ok(fallback),
    }
}

async fn register_citizen(
    State(state): State<AppState>,
    Lang(lang): Lang,
    ApiJson(body): ApiJson<CitizenRegistration>,
) -> ApiResult<impl IntoResponse> {
    let pref = language_field(body.language.as_deref(), lang)?;
    let (account, _) = blocking(&state, move |p| {
        p.register_citizen(&body.email, &body.password, &body.display_name, pref)
    })
    .await?;
    let message = state
        .platform
        .catalogs()
        .localize::<&str>("auth.verification_sent", lang, &[]);
    Ok((
        StatusCode::CREATED,
        Json(json!({ "account": account.view(), "message": message.ok() })),
    ))
}

#[derive(Deserialize)]
struct Verification {
    token: String,
}

async fn verify_email(
    State(state): State<AppState>,
    ApiJson(body): ApiJson<Verification>,
) -> ApiResult<Json<AccountView>> {
    let account = blocking(&state, move |p| p.verify_email(&body.token)).await?;
    Ok(Json(account.view()))
}

#[derive(Deserialize)]
struct EmployeeRegistration {
    payload: String,
    email: String,
    password: String,
    language: Option<String>,
}

async fn register_employee(
    State(state): State<AppState>,
    Lang(lang): Lang,
    ApiJson(body): ApiJson<EmployeeRegistration>,
) -> ApiResult<impl IntoResponse> {
    let pref = language_field(body.language.as_deref(), lang)?;
    let account = blocking(&state, move |p| {
        p.register_employee(&body.payload, &body.email, &body.password, pref)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(account.view())))
}

#[derive(Deserialize)]
struct Login {
    email: String,
    password: String,
}

async fn login(
    State(state): State<AppState>,
    ApiJson(body): ApiJson<Login>,
) -> ApiResult<Json<Value>> {
    let token = blocking(&state, move |p| p.authenticate(&body.email, &body.password)).await?;
    Ok(Json(json!({
        "token": token.token,
        "account_id": token.account_id,
        "role": token.role,
        "city": token.city,
        "expires_at": token.expires_at,
    })))
}

async fn logout(State(state): State<AppState>, caller: Caller) -> ApiResult<StatusCode> {
    blocking(&state, move |p| p.logout(&caller.token)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn me(caller: Caller) -> Json<AccountView> {
    Json(caller.account.view())
}

// ---- complaints ----

#[derive(Deserialize)]
struct Submission {
    image_base64: String,
    location: Value,
    note: Option<String>,
}

/// Decodes a bare base64 string or a `data:` URL.
fn decode_image(text: &str) -> Result<Vec<u8>, Error> {
    let encoded = match text.split_once(";base64,") {
        Some((prefix, rest)) if prefix.starts_with("data:") => rest,
        _ => text,
    };
    let encoded: String = encoded
        .chars()
        .filter(|c| !c.is_ascii_whitespace())
        .collect();
    if encoded.len() / 4 * 3 > MAX_IMAGE_BYTES + 2 {
        return Err(Error::InvalidImage(format!(
            "image exceeds {MAX_IMAGE_BYTES} bytes"
        )));
    }
    let bytes = STANDARD
        .decode(encoded)
        .map_err(|e| Error::InvalidImage(format!("image is not valid base64: {e}")))?;
    if bytes.len() > MAX_IMAGE_BYTES {
        return Err(Error::InvalidImage(format!(
            "image exceeds {MAX_IMAGE_BYTES} bytes"
        )));
    }
    Ok(bytes)
}

async fn submit_complaint(
    State(state): State<AppState>,
    caller: Caller,
    ApiJson(body): ApiJson<Submission>,
) -> ApiResult<impl IntoResponse> {
    let bytes = decode_image(&body.image_base64)?;
    let location: GeoPoint =
        serde_json::from_value(body.location).map_err(|e| Error::InvalidLocation(e.to_string()))?;
    let complaint = blocking(&state, move |p| {
        p.submit_complaint(&caller.account.id, &bytes, location, body.note.as_deref())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(complaint)))
}

async fn list_complaints(
    State(state): State<AppState>,
    caller: Caller,
    query: ApiQuery,
) -> ApiResult<impl IntoResponse> {
    let filter = ComplaintFilter {
        city: query.get("city").map(str::to_string),
        status: query.parsed::<Status>("status")?,
        category: query.parsed::<Category>("category")?,
        submitter: query.get("submitter").map(str::to_string),
    };
    let found = blocking(&state, move |p| {
        p.list_complaints(&caller.account.id, &filter)
    })
    .await?;
    Ok(Json(found))
}

async fn get_complaint(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(&state, move |p| p.get_complaint(&caller.account.id, &id)).await?,
    ))
}

#[derive(Deserialize)]
struct StatusChange {
    status: String,
    feedback: Option<String>,
    expected_revision: Option<u64>,
}

async fn transition_status(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<StatusChange>,
) -> ApiResult<impl IntoResponse> {
    let status: Status = body.status.parse().map_err(Error::InvalidRequest)?;
    let event = blocking(&state, move |p| {
        p.transition_status(
            &caller.account.id,
            &id,
            status,
            body.feedback.as_deref(),
            body.expected_revision,
        )
    })
    .await?;
    Ok(Json(event))
}

#[derive(Deserialize)]
struct CategoryChange {
    category: String,
    expected_revision: Option<u64>,
}

async fn reassign_category(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<CategoryChange>,
) -> ApiResult<impl IntoResponse> {
    let category: Category = body.category.parse().map_err(Error::InvalidRequest)?;
    let event = blocking(&state, move |p| {
        p.reassign_category(&caller.account.id, &id, category, body.expected_revision)
    })
    .await?;
    Ok(Json(event))
}

#[derive(Deserialize, Default)]
struct FakeMark {
    expected_revision: Option<u64>,
}

/// The body is optional here.
async fn mark_fake(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let mark: FakeMark = if body.iter().all(u8::is_ascii_whitespace) {
        FakeMark::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| Error::InvalidRequest(e.to_string()))?
    };
    let expected = mark.expected_revision;
    let event = blocking(&state, move |p| {
        p.mark_fake(&caller.account.id, &id, expected)
    })
    .await?;
    Ok(Json(event))
}

#[derive(Deserialize)]
struct Feedback {
    text: String,
}

async fn send_feedback(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<Feedback>,
) -> ApiResult<impl IntoResponse> {
    let event = blocking(&state, move |p| {
        p.send_feedback(&caller.account.id, &id, &body.text)
    })
    .await?;
    Ok(Json(event))
}

async fn complaint_events(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(&state, move |p| p.complaint_events(&caller.account.id, &id)).await?,
    ))
}

async fn complaint_image(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let (bytes, media_type) =
        blocking(&state, move |p| p.complaint_image(&caller.account.id, &id)).await?;
    let content_type = HeaderValue::from_str(&media_type)
        .unwrap_or(HeaderValue::from_static("application/octet-stream"));
    Ok(([(CONTENT_TYPE, content_type)], Body::from(bytes)).into_response())
}

async fn map_link(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let url = blocking(&state, move |p| p.map_link(&caller.account.id, &id)).await?;
    Ok(Json(json!({ "url": url })))
}

async fn contact_link(
    State(state): State<AppState>,
    caller: Caller,
    Lang(lang): Lang,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let url = blocking(&state, move |p| {
        p.contact_link(&caller.account.id, &id, lang)
    })
    .await?;
    Ok(Json(json!({ "url": url })))
}

// ---- statistics ----

fn scope_of(query: &ApiQuery) -> Option<String> {
    query
        .get("city")
        .filter(|c| *c != NATIONWIDE)
        .map(str::to_string)
}

async fn status_stats(
    State(state): State<AppState>,
    query: ApiQuery,
) -> ApiResult<impl IntoResponse> {
    let city = scope_of(&query);
    let breakdown = blocking(&state, move |p| p.status_breakdown(city.as_deref())).await?;
    Ok(Json(stats::status_series(&breakdown)))
}

async fn category_stats(
    State(state): State<AppState>,
    query: ApiQuery,
) -> ApiResult<impl IntoResponse> {
    let city = scope_of(&query);
    let breakdown = blocking(&state, move |p| p.category_breakdown(city.as_deref())).await?;
    Ok(Json(stats::category_series(&breakdown)))
}

// ---- notifications ----

#[derive(Serialize)]
struct NotificationView {
    #[serde(flatten)]
    notification: Notification,
    message: String,
}

fn render(
    platform: &Platform,
    n: Notification,
    lang: Language,
) -> citysolution_core::Result<NotificationView> {
    let message = platform.render_notification(&n, lang)?;
    Ok(NotificationView {
        notification: n,
        message,
    })
}

async fn list_notifications(
    State(state): State<AppState>,
    caller: Caller,
    Lang(lang): Lang,
) -> ApiResult<Json<Vec<NotificationView>>> {
    let views = blocking(&state, move |p| {
        p.list_notifications(&caller.account.id)?
            .into_iter()
            .map(|n| render(p, n, lang))
            .collect()
    })
    .await?;
    Ok(Json(views))
}

async fn mark_read(
    State(state): State<AppState>,
    caller: Caller,
    Lang(lang): Lang,
    Path(id): Path<String>,
) -> ApiResult<Json<NotificationView>> {
    let view = blocking(&state, move |p| {
        let n = p.mark_notification_read(&caller.account.id, &id)?;
        render(p, n, lang)
    })
    .await?;
    Ok(Json(view))
}

// ---- administration ----

#[derive(Deserialize)]
struct CredentialRequest {
    employee_id: String,
    first_name: String,
    last_name: String,
    city: String,
}

async fn generate_credential(
    State(state): State<AppState>,
    caller: Caller,
    ApiJson(body): ApiJson<CredentialRequest>,
) -> ApiResult<impl IntoResponse> {
    let payload =
        CredentialPayload::new(body.employee_id, body.first_name, body.last_name, body.city)
            .map_err(Error::from)?;
    let (record, text) = blocking(&state, move |p| {
        p.generate_credential(&caller.account.id, payload)
    })
    .await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "credential": record, "payload": text })),
    ))
}

async fn list_credentials(
    State(state): State<AppState>,
    caller: Caller,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(&state, move |p| p.list_credentials(&caller.account.id)).await?,
    ))
}

async fn list_employees(
    State(state): State<AppState>,
    caller: Caller,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(&state, move |p| p.list_employees(&caller.account.id)).await?,
    ))
}

async fn remove_employee(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(&state, move |p| p.remove_employee(&caller.account.id, &id)).await?,
    ))
}
