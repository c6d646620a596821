#![allow(dead_code)]

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use base64::Engine;
use citysolution_core::testkit::{city_point, photo_of, Harness, PASSWORD};
use citysolution_core::Category;
use citysolution_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
    pub body: Value,
}

impl Reply {
    pub fn code(&self) -> &str {
        self.body["error"]["code"].as_str().unwrap_or("")
    }

    pub fn message(&self) -> &str {
        self.body["error"]["message"].as_str().unwrap_or("")
    }
}

pub struct TestApp {
    pub harness: Harness,
    pub app: Router,
}

impl TestApp {
    pub fn new() -> Self {
        Self::with_seed(7)
    }

    pub fn with_seed(seed: u64) -> Self {
        let harness = Harness::with_seed(seed);
        let app = router(AppState::new(harness.platform.clone()));
        Self { harness, app }
    }

    pub async fn send(&self, request: Request<Body>) -> Reply {
        let response = self.app.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let headers = response.headers().clone();
        let bytes = response
            .into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec();
        let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        Reply {
            status,
            headers,
            bytes,
            body,
        }
    }

    pub async fn call(
        &self,
        method: &str,
        uri: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> Reply {
        self.call_lang(method, uri, token, body, None).await
    }

    pub async fn call_lang(
        &self,
        method: &str,
        uri: &str,
        token: Option<&str>,
        body: Option<Value>,
        accept_language: Option<&str>,
    ) -> Reply {
        let mut builder = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            builder = builder.header("authorization", format!("Bearer {t}"));
        }
        if let Some(l) = accept_language {
            builder = builder.header("accept-language", l);
        }
        let request = match body {
            Some(b) => builder
                .header("content-type", "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => builder.body(Body::empty()).unwrap(),
        };
        self.send(request).await
    }

    pub async fn login(&self, email: &str) -> String {
        let reply = self
            .call(
                "POST",
                "/api/login",
                None,
                Some(json!({ "email": email, "password": PASSWORD })),
            )
            .await;
        assert_eq!(reply.status, StatusCode::OK, "{:?}", reply.body);
        reply.body["token"].as_str().unwrap().to_string()
    }

    /// Registers and verifies through the API, then logs in.
    pub async fn citizen(&self, email: &str, language: &str) -> String {
        let reply = self
            .call(
                "POST",
                "/api/register/citizen",
                None,
                Some(json!({
                    "email": email,
                    "password": PASSWORD,
                    "display_name": "Rahim",
                    "language": language,
                })),
            )
            .await;
        assert_eq!(reply.status, StatusCode::CREATED, "{:?}", reply.body);
        let mail = self.harness.mailer.last_to(email).unwrap();
        let reply = self
            .call(
                "POST",
                "/api/verify-email",
                None,
                Some(json!({ "token": mail.params[1] })),
            )
            .await;
        assert_eq!(reply.status, StatusCode::OK, "{:?}", reply.body);
        self.login(email).await
    }

    /// Employee created through the platform, logged in through the API.
    pub async fn employee(&self, employee_id: &str, city: &str) -> String {
        self.harness.employee(employee_id, city).unwrap();
        self.login(&format!("{}@city.gov.bd", employee_id.to_lowercase()))
            .await
    }

    pub async fn admin(&self) -> String {
        self.login(citysolution_core::testkit::ADMIN_EMAIL).await
    }

    pub async fn submit(&self, token: &str, city: &str, category: Category) -> Reply {
        let p = city_point(city);
        let (lat, lon) = p.coordinates().unwrap();
        self.call(
            "POST",
            "/api/complaints",
            Some(token),
            Some(json!({
                "image_base64": encode(&photo_of(category)),
                "location": { "latitude": lat, "longitude": lon, "source": "Auto" },
                "note": "near the market",
            })),
        )
        .await
    }
}

pub fn encode(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}
