use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use calibrom::interface::http::{router, ModelInfo, PredictResponse};
use calibrom::rom::{build_rom, generate_split, Split};
use calibrom::{RomBundle, RomConfig};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn bundle() -> Arc<RomBundle> {
    static BUNDLE: OnceLock<Arc<RomBundle>> = OnceLock::new();
    BUNDLE
        .get_or_init(|| {
            let cfg = RomConfig::preset("smoke").unwrap();
            let fom = cfg.full_order_model().unwrap();
            let train = generate_split(&fom, &cfg, Split::Train).unwrap();
            let val = generate_split(&fom, &cfg, Split::Validation).unwrap();
            Arc::new(build_rom(&cfg, &train, &val).unwrap().bundle)
        })
        .clone()
}

async fn call(app: Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

fn post(path: &str, body: &str) -> Request<Body> {
    Request::post(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(path: &str) -> Request<Body> {
    Request::get(path).body(Body::empty()).unwrap()
}

#[tokio::test]
async fn health_reports_ok() {
    let (status, body) = call(router(bundle(), None), get("/health")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn model_describes_the_bundle() {
    let b = bundle();
    let (status, body) = call(router(b.clone(), None), get("/model")).await;
    assert_eq!(status, StatusCode::OK);
    let info: ModelInfo = serde_json::from_slice(&body).unwrap();
    assert_eq!(info.modes, b.modes());
    assert_eq!(info.stations, b.stations());
    assert_eq!(info.station_z.len(), b.stations());
    assert_eq!(info.parameter_box.htc, [218.0, 320.0]);
    assert_eq!(info.energy_spectrum.len(), info.cumulative_energy.len());
    assert!(info.cumulative_energy.windows(2).all(|w| w[1] >= w[0]));
}

#[tokio::test]
async fn predict_returns_consistent_slices() {
    let b = bundle();
    let last = b.stations() - 1;
    let req = format!(r#"{{"t_ambient": 293.0, "htc": 269.0, "slices": [0, {last}]}}"#);
    let (status, body) = call(router(b.clone(), None), post("/predict", &req)).await;
    assert_eq!(status, StatusCode::OK);
    let resp: PredictResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(resp.slices.len(), 2);
    assert!(!resp.extrapolation);
    assert_eq!(resp.surface_means.len(), b.stations());

    // The inlet slice is the prescribed inlet temperature.
    let inlet = &resp.slices[0];
    assert!(inlet.values.iter().all(|v| (v - b.meta.t_inlet).abs() <= 1e-6));
    assert_eq!(inlet.values.len(), inlet.mask.iter().filter(|&&m| m).count());

    // Summary recomputed from the returned slices.
    let all: Vec<f64> = resp
        .slices
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .collect();
    let min = all.iter().copied().fold(f64::INFINITY, f64::min);
    let max = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let summary = resp.summary.unwrap();
    assert!((summary.min - min).abs() <= 1e-9);
    assert!((summary.max - max).abs() <= 1e-9);
    assert!((summary.mean - mean).abs() <= 1e-9);
    for s in &resp.slices {
        let smin = s.values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((s.min - smin).abs() <= 1e-9);
    }
}

#[tokio::test]
async fn predict_outside_the_box_is_flagged() {
    let (status, body) = call(
        router(bundle(), None),
        post("/predict", r#"{"t_ambient": 310.0, "htc": 269.0}"#),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let resp: PredictResponse = serde_json::from_slice(&body).unwrap();
    assert!(resp.extrapolation);
    assert!(resp.summary.is_none());
}

#[tokio::test]
async fn malformed_requests_are_client_errors() {
    let b = bundle();
    let bad = [
        r#"{"t_ambient": 293.0, "htc": "abc"}"#.to_string(),
        r#"{"t_ambient": 293.0}"#.to_string(),
        "not json".to_string(),
        r#"{"t_ambient": 293.0, "htc": -5.0}"#.to_string(),
        format!(
            r#"{{"t_ambient": 293.0, "htc": 250.0, "slices": [{}]}}"#,
            b.stations()
        ),
    ];
    for body in bad {
        let (status, resp) = call(router(b.clone(), None), post("/predict", &body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        let v: Value = serde_json::from_slice(&resp).unwrap();
        assert!(v["error"].is_string());
    }
}

#[tokio::test]
async fn unknown_routes_are_json_404() {
    let (status, body) = call(router(bundle(), None), get("/nope")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["error"], "not found");
}

#[tokio::test]
async fn root_serves_the_ui_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>ui</html>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let app = router(bundle(), Some(dir.path().to_path_buf()));

    let (status, body) = call(app.clone(), get("/")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<html>ui</html>");
    let (status, body) = call(app.clone(), get("/app.js")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"console.log(1)");
    let (status, _) = call(app.clone(), get("/missing.css")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    // API routes still win over static files.
    let (status, _) = call(app, get("/health")).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn root_without_ui_lists_endpoints() {
    let (status, body) = call(router(bundle(), None), get("/")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["endpoints"].as_array().unwrap().len(), 3);
}
