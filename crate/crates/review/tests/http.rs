mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use alterlink_review::router;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>, coder: Option<&str>) -> (StatusCode, Value, u64) {
    let mut builder = Request::builder().method(method).uri(uri);
    if let Some(c) = coder {
        builder = builder.header("x-coder-id", c);
    }
    let req = match body {
        Some(b) => builder
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let header: u64 = resp.headers()["x-revision"].to_str().unwrap().parse().unwrap();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["revision"].as_u64(), Some(header), "body and header revision differ");
    (status, v, header)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn scripted_review_round() {
    let dir = tempfile::tempdir().unwrap();
    let session = Arc::new(common::open(dir.path()));
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<html>review</html>").unwrap();
    let app = router(session.clone(), Some(ui.path()));

    let (st, v, rev) = call(&app, "GET", "/cases?status=pending", None, None).await;
    assert_eq!((st, rev), (StatusCode::OK, 0));
    let cases = v["cases"].as_array().unwrap().clone();
    let margins: Vec<f64> = cases.iter().map(|c| c["margin"].as_f64().unwrap()).collect();
    assert!(margins.windows(2).all(|w| w[0] <= w[1]));

    let pair = cases.iter().find(|c| c["kind"] == "pair").unwrap();
    let id = pair["id"].as_str().unwrap();
    let (st, v, _) = call(&app, "GET", &format!("/cases/{id}"), None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["case"]["candidates"].as_array().unwrap().len(), 2);

    let (st, _, _) = call(&app, "GET", "/cases/missing", None, None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    // coder id from the header
    let (st, v, _) = call(&app, "POST", &format!("/cases/{id}/decision"), Some(json!({"verdict": "accept"})), Some("h1")).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["decision"]["coder"], "h1");
    assert!(v["decision"]["staged"].is_array());

    let (st, v, _) = call(&app, "POST", &format!("/cases/{id}/decision"), Some(json!({"verdict": "reject", "coder": "h2"})), None).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["existing"]["coder"], "h1");

    let (st, _, _) = call(&app, "POST", &format!("/cases/{id}/decision"), Some(json!({"verdict": "reject"})), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _, _) = call(&app, "POST", &format!("/cases/{id}/decision"), Some(json!({"verdict": "maybe", "coder": "h1"})), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, v, rev) = call(&app, "POST", "/recompute", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(rev, 1);
    assert!(v["recompute"]["changed_pending"].as_u64().unwrap() >= 1);

    let (_, v, rev) = call(&app, "GET", "/revision", None, None).await;
    assert_eq!(rev, 1);
    assert_eq!(v["status"]["resolved"], 1);

    let (st, v, _) = call(&app, "GET", "/export", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(v["export"]["edges_csv"].as_str().unwrap().starts_with("src,dst,confidence"));
    assert!(v["export"]["rows"].as_array().unwrap().iter().any(|r| r["origin"] == "human"));

    let resp = app
        .clone()
        .oneshot(Request::builder().uri("/index.html").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn racing_clients_get_one_success() {
    let dir = tempfile::tempdir().unwrap();
    let session = Arc::new(common::open(dir.path()));
    let app = router(session, None);
    let (_, v, _) = call(&app, "GET", "/cases", None, None).await;
    let id = v["cases"][0]["id"].as_str().unwrap().to_string();
    let uri = format!("/cases/{id}/decision");
    let a = call(&app, "POST", &uri, Some(json!({"verdict": "reject", "coder": "a"})), None);
    let b = call(&app, "POST", &uri, Some(json!({"verdict": "skip", "coder": "b"})), None);
    let (ra, rb) = tokio::join!(a, b);
    let mut codes = [ra.0, rb.0];
    codes.sort();
    assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
}
