use std::process::Command;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use refstd_cli::server::router;

const BASELINE: &str = r#"{"se_x":0.9,"sp_x":0.9,"se_z1":0.6,"sp_z1":0.95,"se_z2":0.6,"sp_z2":0.95,"eta":0.1,"xi":0.0,"eps":0.0}"#;

async fn call(method: &str, uri: &str, body: &str) -> (StatusCode, String, Vec<u8>) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let response = router(None).oneshot(request).await.unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get("content-type")
        .map(|h| h.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = response
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, content_type, bytes)
}

fn cli(args: &[&str]) -> Vec<u8> {
    Command::new(env!("CARGO_BIN_EXE_refstd"))
        .args(args)
        .output()
        .unwrap()
        .stdout
}

fn parse(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[tokio::test]
async fn health() {
    let (status, ct, body) = call("GET", "/api/health", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ct, "application/json");
    assert_eq!(parse(&body), json!({"status": "ok"}));
}

#[tokio::test]
async fn compute_matches_cli_bytes() {
    let (status, _, body) =
        call("POST", "/api/compute", &format!(r#"{{"spec":{BASELINE}}}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parse(&body).as_array().unwrap().len(), 4);
    assert_eq!(body, cli(&["compute"]));

    let req = format!(r#"{{"spec":{BASELINE},"methods":["all"]}}"#);
    let (_, _, body) = call("POST", "/api/compute", &req).await;
    assert_eq!(body, cli(&["compute", "--methods", "all"]));
}

#[tokio::test]
async fn sweep_matches_cli_bytes() {
    let axis = r#"{"parameter":"eps","lo":-0.005,"hi":0.045,"points":51}"#;
    let req = format!(r#"{{"spec":{BASELINE},"axis":{axis},"methods":["all"],"format":"csv"}}"#);
    let (status, ct, body) = call("POST", "/api/sweep", &req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ct, "text/csv");
    let expected = cli(&[
        "sweep",
        "--axis",
        "eps",
        "--lo",
        "-0.005",
        "--hi",
        "0.045",
        "--points",
        "51",
        "--methods",
        "all",
    ]);
    assert_eq!(body, expected);

    let req = format!(r#"{{"spec":{BASELINE},"axis":{axis}}}"#);
    let (_, ct, body) = call("POST", "/api/sweep", &req).await;
    assert_eq!(ct, "application/json");
    assert_eq!(parse(&body)["rows"].as_array().unwrap().len(), 51);
}

#[tokio::test]
async fn bounds_baseline() {
    let (status, _, body) = call("POST", "/api/bounds", &format!(r#"{{"spec":{BASELINE}}}"#)).await;
    assert_eq!(status, StatusCode::OK);
    let v = parse(&body);
    let close = |x: &Value, want: f64| (x.as_f64().unwrap() - want).abs() < 1e-12;
    assert!(close(&v["xi"][0], -0.04) && close(&v["xi"][1], 0.06));
    assert!(close(&v["eps"][0], -0.005) && close(&v["eps"][1], 0.045));
    assert_eq!(body, cli(&["bounds"]));
}

#[tokio::test]
async fn crossovers_endpoint() {
    let req = format!(
        r#"{{"spec":{BASELINE},"axis":{{"parameter":"xi","lo":-0.04,"hi":0.06,"points":241}},"methods":["LCM_HCI","CRS_A"],"quantity":"abs_delta_se"}}"#
    );
    let (status, _, body) = call("POST", "/api/crossovers", &req).await;
    assert_eq!(status, StatusCode::OK);
    let v = parse(&body);
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert!(v[0]["residual"].as_f64().unwrap().abs() < 1e-9);
}

#[tokio::test]
async fn error_statuses() {
    let out_of_bounds = BASELINE.replace(r#""xi":0.0"#, r#""xi":0.07"#);
    let (status, _, body) = call(
        "POST",
        "/api/compute",
        &format!(r#"{{"spec":{out_of_bounds}}}"#),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(parse(&body)["code"], "OUT_OF_BOUNDS");

    let invalid = BASELINE.replace(r#""eta":0.1"#, r#""eta":0.0"#);
    let (status, _, body) = call("POST", "/api/compute", &format!(r#"{{"spec":{invalid}}}"#)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse(&body)["code"], "INVALID_SPEC");

    let (status, _, body) = call(
        "POST",
        "/api/compute",
        &format!(r#"{{"spec":{BASELINE},"extra":1}}"#),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse(&body)["code"], "BAD_REQUEST");

    let (status, _, body) = call("POST", "/api/compute", "not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse(&body)["code"], "BAD_REQUEST");

    let req = format!(
        r#"{{"spec":{BASELINE},"axis":{{"parameter":"eta","lo":0.1,"hi":0.3,"points":1}}}}"#
    );
    let (status, _, body) = call("POST", "/api/sweep", &req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse(&body)["detail"], "axis");

    let (status, _, _) = call("GET", "/api/nothing", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn identical_concurrent_requests_identical_bodies() {
    let req = format!(
        r#"{{"spec":{BASELINE},"axis":{{"parameter":"xi","lo":-0.04,"hi":0.06,"points":121}},"methods":["all"]}}"#
    );
    let calls = (0..8).map(|_| {
        let req = req.clone();
        tokio::spawn(async move { call("POST", "/api/sweep", &req).await.2 })
    });
    let mut bodies = Vec::new();
    for c in calls {
        bodies.push(c.await.unwrap());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn serves_static_bundle() {
    let dir = std::env::temp_dir().join(format!("refstd-static-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("index.html"), "<html>explorer</html>").unwrap();
    let app = router(Some(dir.clone()));
    let request = Request::builder().uri("/").body(Body::empty()).unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let body = response.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<html>explorer</html>");

    let request = Request::builder()
        .uri("/api/health")
        .body(Body::empty())
        .unwrap();
    assert_eq!(app.oneshot(request).await.unwrap().status(), StatusCode::OK);
    std::fs::remove_dir_all(&dir).unwrap();
}
