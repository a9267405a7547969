#![allow(dead_code)]

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use sarlab::service::{router, AppState, ServiceConfig};
use serde_json::Value;
use tower::ServiceExt;

pub const LINEAR: &str = r#"{
    "waveform": {"type": "pmcw", "fc": 435e9, "b": 10e9, "td": 1e-6, "ncode": 64, "nf": 16},
    "aperture": {"kind": "linear", "ny": 32, "z0": 0.0},
    "scene": {"points": [{"xyz": [0.0, 0.001, 0.05]}, {"xyz": [0.0, -0.002, 0.06], "re": 0.5, "im": 0.5}]},
    "grid": {"axes": [{"min": -0.006, "max": 0.006, "count": 25}, {"min": 0.03, "max": 0.08, "count": 34}]},
    "algo": "rma-linear"
}"#;

pub const PLANAR: &str = r#"{
    "waveform": {"type": "pmcw", "fc": 435e9, "b": 10e9, "td": 1e-6, "ncode": 64, "nf": 8},
    "aperture": {"kind": "planar", "nx": 8, "ny": 8, "z0": 0.0},
    "scene": {"points": [{"xyz": [0.0, 0.0, 0.05]}]},
    "grid": {"axes": [{"min": -0.004, "max": 0.004, "count": 9}, {"min": -0.004, "max": 0.004, "count": 9}, {"min": 0.03, "max": 0.07, "count": 9}]}
}"#;

/// [`PLANAR`] without a grid, so the default half-resolution grid applies.
pub fn planar_psf() -> String {
    let mut v: serde_json::Value = serde_json::from_str(PLANAR).unwrap();
    v.as_object_mut().unwrap().remove("grid");
    v.to_string()
}

pub fn app(dir: &std::path::Path) -> Router {
    router(AppState::new(ServiceConfig {
        data_dir: dir.to_path_buf(),
        workers: 2,
        base_dir: dir.to_path_buf(),
    }))
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, body: String) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let (s, b) = send(app, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

pub async fn submit(app: &Router, kind: &str, config: &str) -> (StatusCode, Value) {
    post_json(app, "/api/v1/jobs", format!(r#"{{"type": "{kind}", "config": {config}}}"#)).await
}

/// Polls until the job leaves queued/running.
pub async fn wait(app: &Router, id: &str) -> Value {
    for _ in 0..1200 {
        let (s, b) = get(app, &format!("/api/v1/jobs/{id}")).await;
        assert_eq!(s, StatusCode::OK);
        let v: Value = serde_json::from_slice(&b).unwrap();
        if v["status"] == "done" || v["status"] == "failed" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {id} did not finish");
}

