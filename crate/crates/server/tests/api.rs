use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use lgcs::cache::ResultCache;
use lgcs::config::figure_config;
use lgcs::export::{panel_csv, CURVES};
use lgcs::pipeline::{run, ResultRecord, RunMode};
use lgcs_server::{router, AppState, Dataset};

fn state(dir: &std::path::Path, inline: usize) -> AppState {
    AppState::new(ResultCache::new(dir).unwrap(), Dataset::demos(), inline)
}

async fn call(state: &AppState, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn small_request(dataset: &str) -> Value {
    json!({
        "dataset": dataset,
        "points": ["10::10", "50::50"],
        "bandwidth": [0.6, 0.6],
        "truncation": 5,
        "order": 5,
        "grid_size": 65,
        "bands": { "replicates": 8 }
    })
}

#[tokio::test]
async fn lists_demo_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body) = call(&state(dir.path(), 10), Method::GET, "/api/datasets", None).await;
    assert_eq!(status, StatusCode::OK);
    let list: Vec<Value> = serde_json::from_str(&body).unwrap();
    assert_eq!(list.len(), 4);
    assert_eq!(list[0]["name"], "gaussian-wn");
    assert_eq!(list[0]["n"], 1859);
    assert_eq!(list[0]["columns"], json!(["Y1", "Y2"]));
    assert_eq!(list[0]["transform"], "raw");
}

#[tokio::test]
async fn second_request_is_served_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), 10);
    let (s1, first) = call(&st, Method::POST, "/api/spectra", Some(small_request("cosine"))).await;
    let (s2, second) = call(&st, Method::POST, "/api/spectra", Some(small_request("cosine"))).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    let a: Value = serde_json::from_str(&first).unwrap();
    let b: Value = serde_json::from_str(&second).unwrap();
    assert_eq!(a["cached"], false);
    assert_eq!(b["cached"], true);
    assert_eq!(a["record"], b["record"]);
    assert_eq!(a["config_hash"], b["config_hash"]);

    // a fresh server on the same cache directory answers identically
    let restarted = state(dir.path(), 10);
    let (_, third) = call(&restarted, Method::POST, "/api/spectra", Some(small_request("cosine"))).await;
    assert_eq!(third, second);
}

#[tokio::test]
async fn invalid_requests() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), 10);
    let mut bad = small_request("cosine");
    bad["points"] = json!(["10::10", "0::50"]);
    let (status, body) = call(&st, Method::POST, "/api/spectra", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["errors"][0]["field"], "points[1]");

    let (status, _) = call(&st, Method::POST, "/api/spectra", Some(small_request("nope"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, body) = call(&st, Method::POST, "/api/spectra", Some(json!({ "dataset": "cosine" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body.contains("\"field\":\"body\""));

    let (status, _) = call(&st, Method::GET, "/api/jobs/0123abcd", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn long_runs_become_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), 0);
    let (status, body) = call(&st, Method::POST, "/api/spectra", Some(small_request("gaussian-wn"))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let v: Value = serde_json::from_str(&body).unwrap();
    let token = v["job"].as_str().unwrap().to_string();
    let uri = format!("/api/jobs/{token}");
    let mut result = None;
    for _ in 0..600 {
        let (status, body) = call(&st, Method::GET, &uri, None).await;
        match status {
            StatusCode::CONFLICT => {
                let v: Value = serde_json::from_str(&body).unwrap();
                assert_eq!(v["status"], "running");
                assert_eq!(v["progress"]["total"], 8);
                tokio::time::sleep(Duration::from_millis(50)).await;
            }
            StatusCode::OK => {
                result = Some(body);
                break;
            }
            other => panic!("unexpected {other}: {body}"),
        }
    }
    let done: Value = serde_json::from_str(&result.expect("job finished")).unwrap();
    assert_eq!(done["config_hash"], token.as_str());
    assert!(done["record"]["points"][0]["bands"].is_object());

    // the finished job is now a cache hit
    let (status, body) = call(&st, Method::POST, "/api/spectra", Some(small_request("gaussian-wn"))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.starts_with("{\"cached\":true"));

    let (status, body) = call(&st, Method::GET, &format!("/api/complex?hash={token}&point=0&omega=0.3"), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let c: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(c["omega"], 0.296875);
    assert_eq!(c["points"].as_array().unwrap().len(), 8);
    let (status, _) = call(&st, Method::GET, &format!("/api/complex?hash={token}&point=x&omega=0.3"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn server_matches_cli_export() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), 1000);
    let config = figure_config("gaussian-wn").unwrap();
    let request = json!({
        "dataset": "gaussian-wn",
        "points": config.points,
        "bandwidth": [0.6, 0.6],
        "truncation": 10,
        "order": 5,
        "window": "tukey-hanning",
        "grid_size": 1024,
        "bands": { "replicates": 100, "probs": [0.05, 0.95] }
    });
    let (status, body) = call(&st, Method::POST, "/api/spectra", Some(request)).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    let served = ResultRecord::from_json(&v["record"].to_string()).unwrap();
    let direct = run(&config, RunMode::Bands, None).unwrap();
    assert_eq!(v["config_hash"], direct.config_hash.as_str());
    for i in 0..3 {
        for curve in CURVES {
            assert_eq!(panel_csv(&served, i, curve).unwrap(), panel_csv(&direct, i, curve).unwrap());
        }
    }
}
