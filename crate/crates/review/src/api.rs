use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::session::{DecisionRequest, ReviewError, Session, StatusFilter};

pub const CODER_HEADER: &str = "x-coder-id";
pub const REVISION_HEADER: &str = "x-revision";
const RETRY_AFTER_SECS: &str = "5";

type Shared = Arc<Session>;

#[derive(Debug, Deserialize)]
struct ListQuery {
    #[serde(default)]
    status: StatusFilter,
}

/// JSON body with the revision counter folded in and mirrored as a header.
fn with_revision<T: Serialize>(status: StatusCode, revision: u64, key: &str, body: T) -> Response {
    let mut map = serde_json::Map::new();
    map.insert("revision".into(), json!(revision));
    map.insert(key.into(), serde_json::to_value(body).unwrap_or(Value::Null));
    let mut resp = (status, Json(Value::Object(map))).into_response();
    resp.headers_mut().insert(REVISION_HEADER, HeaderValue::from(revision));
    resp
}

fn error_response(session: &Session, err: ReviewError) -> Response {
    let revision = session.revision();
    let (status, kind) = match &err {
        ReviewError::NotFound(_) => (StatusCode::NOT_FOUND, "not-found"),
        ReviewError::Conflict { .. } => (StatusCode::CONFLICT, "conflict"),
        ReviewError::Busy => (StatusCode::SERVICE_UNAVAILABLE, "busy"),
        ReviewError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad-request"),
        ReviewError::Core(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.category()),
    };
    let mut body = json!({ "revision": revision, "error": kind, "message": err.to_string() });
    if let ReviewError::Conflict { existing, .. } = &err {
        body["existing"] = serde_json::to_value(existing).unwrap_or(Value::Null);
    }
    let mut resp = (status, Json(body)).into_response();
    resp.headers_mut().insert(REVISION_HEADER, HeaderValue::from(revision));
    if status == StatusCode::SERVICE_UNAVAILABLE {
        resp.headers_mut()
            .insert(axum::http::header::RETRY_AFTER, HeaderValue::from_static(RETRY_AFTER_SECS));
    }
    resp
}

/// Run blocking session work off the async executor.
async fn blocking<T, F>(session: &Shared, f: F) -> Result<T, Response>
where
    T: Send + 'static,
    F: FnOnce(&Session) -> Result<T, ReviewError> + Send + 'static,
{
    let s = session.clone();
    match tokio::task::spawn_blocking(move || f(&s)).await {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(error_response(session, e)),
        Err(join) => Err(error_response(
            session,
            ReviewError::BadRequest(format!("worker failed: {join}")),
        )),
    }
}

async fn list_cases(State(s): State<Shared>, Query(q): Query<ListQuery>) -> Response {
    let (revision, cases) = s.list_cases(q.status);
    with_revision(StatusCode::OK, revision, "cases", cases)
}

async fn get_case(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> Response {
    match blocking(&s, move |s| s.get_case(&id)).await {
        Ok((revision, detail)) => with_revision(StatusCode::OK, revision, "case", detail),
        Err(r) => r,
    }
}

async fn post_decision(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Result<Json<DecisionRequest>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let mut req = match body {
        Ok(Json(r)) => r,
        Err(e) => return error_response(&s, ReviewError::BadRequest(e.body_text())),
    };
    if req.coder.is_none() {
        req.coder = headers
            .get(CODER_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
    }
    match blocking(&s, move |s| s.post_decision(&id, req)).await {
        Ok((revision, record)) => with_revision(StatusCode::OK, revision, "decision", record),
        Err(r) => r,
    }
}

async fn recompute(State(s): State<Shared>) -> Response {
    if s.is_busy() {
        return error_response(&s, ReviewError::Busy);
    }
    match blocking(&s, |s| s.recompute()).await {
        Ok(report) => with_revision(StatusCode::OK, report.revision, "recompute", report),
        Err(r) => r,
    }
}

async fn export(State(s): State<Shared>) -> Response {
    match blocking(&s, |s| s.export()).await {
        Ok(report) => with_revision(StatusCode::OK, report.revision, "export", report),
        Err(r) => r,
    }
}

async fn revision(State(s): State<Shared>) -> Response {
    match s.status() {
        Ok(st) => with_revision(StatusCode::OK, st.revision, "status", st),
        Err(e) => error_response(&s, e),
    }
}

/// API routes, plus the static UI bundle at `/` when `ui_dir` is given.
pub fn router(session: Arc<Session>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/cases", get(list_cases))
        .route("/cases/{id}", get(get_case))
        .route("/cases/{id}/decision", post(post_decision))
        .route("/recompute", post(recompute))
        .route("/export", get(export))
        .route("/revision", get(revision))
        .with_state(session);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serve until ctrl-c.
pub async fn serve(session: Arc<Session>, addr: SocketAddr, ui_dir: Option<&Path>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("review service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(session, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
