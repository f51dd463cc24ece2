use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use gastimate::{ingest, synthchain, ChainView, LinearModel, SynthConfig};
use gastimate_service::{router, AppState, ChainData, Snapshot};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Body) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json").body(body).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, "GET", uri, Body::empty()).await
}

fn app_with(chain: Option<ChainView>, model: Option<LinearModel>) -> Router {
    router(AppState::new(Snapshot { chain: chain.map(|c| Arc::new(ChainData::new(c))), model, trained_at: None }))
}

fn jsonl(chain: &ChainView) -> String {
    let mut buf = Vec::new();
    ingest::write_chain(&mut buf, chain).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Three blocks each holding one transaction at every price 1..=100, so the
/// feature at price p is exactly p - 1 percent. With a = ln 35 and b = -1 the
/// predicted minutes are 35 / p - 1.
fn price_ladder_app() -> Router {
    let lines: String = (1..=3)
        .map(|n| {
            let txs: Vec<Value> = (1..=100)
                .map(|p| json!({"hash": format!("0x{n}-{p}"), "sender": format!("s{p}"), "nonce": n, "gas_price_gwei": p, "pending_ts": 1000 * n - 10}))
                .collect();
            json!({"number": n, "timestamp": 1000 * n, "txs": txs}).to_string() + "\n"
        })
        .collect();
    let chain = ingest::read_chain(lines.as_bytes()).unwrap();
    app_with(Some(chain), Some(LinearModel::from_coefficients(35f64.ln(), -1.0)))
}

#[tokio::test]
async fn health_reports_head() {
    let app = router(AppState::new(Snapshot::default()));
    assert_eq!(get(&app, "/health").await, (StatusCode::OK, json!({"status": "ok", "head": null})));

    let chain = synthchain::generate(&SynthConfig { n_blocks: 100, ..Default::default() }).unwrap();
    let (status, body) = call(&app, "POST", "/v1/chain", Body::from(jsonl(&chain))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["blocks"], 100);
    assert_eq!(get(&app, "/health").await.1["head"], 100);

    assert_eq!(get(&app, "/nope").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn guards_before_training() {
    let app = router(AppState::new(Snapshot::default()));
    let (status, body) = get(&app, "/v1/lookup").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "no_model");
    assert_eq!(get(&app, "/v1/model").await.1["code"], "no_model");

    let app = app_with(None, Some(LinearModel::from_coefficients(1.0, -0.5)));
    assert_eq!(get(&app, "/v1/lookup").await.1["code"], "no_chain");
    let (status, body) = call(&app, "POST", "/v1/train", Body::from("{}")).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::CONFLICT, Some("no_chain")));
}

#[tokio::test]
async fn lookup_shapes() {
    let app = price_ladder_app();
    let (status, body) = get(&app, "/v1/lookup").await;
    assert_eq!(status, StatusCode::OK);
    let rows = body["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 60);
    assert_eq!(body["monotone_ok"], true);
    let labels = ["very_cheap", "cheap", "regular", "expensive", "very_expensive"];
    assert!(rows.iter().all(|r| labels.contains(&r["category"].as_str().unwrap())));

    let body = get(&app, "/v1/lookup?min=10&max=10").await.1;
    assert_eq!(body["rows"].as_array().unwrap().len(), 1);

    for bad in ["/v1/lookup?step=0", "/v1/lookup?min=5&max=2", "/v1/lookup?min=abc"] {
        let (status, body) = get(&app, bad).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        assert_eq!(body["code"], "bad_request");
    }
}

#[tokio::test]
async fn price_ladder_recommendations() {
    let app = price_ladder_app();
    let (status, body) = get(&app, "/v1/recommend?deadline_minutes=5&kth=1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["gas_price_gwei"], 6.0);
    assert_eq!(get(&app, "/v1/recommend?deadline_minutes=5&kth=3").await.1["gas_price_gwei"], 8.0);

    let (status, body) = get(&app, "/v1/recommend?deadline_minutes=0.5&max=20").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "no_price_meets_deadline");

    for bad in ["/v1/recommend?deadline_minutes=5&kth=0", "/v1/recommend?deadline_minutes=0", "/v1/recommend?kth=2"] {
        assert_eq!(get(&app, bad).await.0, StatusCode::BAD_REQUEST, "{bad}");
    }
}

#[tokio::test]
async fn recommend_agrees_with_lookup_on_random_snapshots() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..100 {
        let chain = synthchain::generate(&SynthConfig {
            seed: i,
            n_blocks: rng.random_range(20..160),
            block_capacity: rng.random_range(2..12),
            arrival_rate: rng.random_range(1.0..14.0),
            ..Default::default()
        })
        .unwrap();
        let model = LinearModel::from_coefficients(rng.random_range(0.5..4.0), -rng.random_range(0.0..1.2));
        let app = app_with(Some(chain), Some(model));
        let deadline: f64 = rng.random_range(0.5..20.0);
        let kth: usize = rng.random_range(1..6);
        let lookup = get(&app, "/v1/lookup?min=1&max=60&step=1").await.1;
        let expected = lookup["rows"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["predicted_minutes"].as_f64().unwrap() <= deadline)
            .nth(kth - 1)
            .cloned();
        let (status, body) = get(&app, &format!("/v1/recommend?deadline_minutes={deadline}&kth={kth}")).await;
        match expected {
            Some(row) => {
                assert_eq!(status, StatusCode::OK);
                assert_eq!(body["gas_price_gwei"], row["gas_price_gwei"]);
                assert_eq!(body["predicted_minutes"], row["predicted_minutes"]);
                assert_eq!(body["category"], row["category"]);
            }
            None => assert_eq!(status, StatusCode::NOT_FOUND),
        }
    }
}

#[tokio::test]
async fn train_and_install_models() {
    let app = router(AppState::new(Snapshot::default()));
    let chain = synthchain::generate(&SynthConfig { seed: 3, n_blocks: 400, ..Default::default() }).unwrap();
    call(&app, "POST", "/v1/chain", Body::from(jsonl(&chain))).await;

    let (status, trained) = call(&app, "POST", "/v1/train", Body::from(r#"{"lookback": 60}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(trained["lookback"], 60);
    assert!(trained["n_train"].as_u64().unwrap() > 100);
    assert_eq!(get(&app, "/v1/model").await.1, trained);

    let custom = json!({"intercept_a": 2.0, "slope_b": -0.4, "n_train": 0, "train_from": 0, "train_to": 0, "lookback": 120});
    let (status, _) = call(&app, "POST", "/v1/model", Body::from(custom.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(get(&app, "/v1/model").await.1, custom);

    let (status, body) = call(&app, "POST", "/v1/model", Body::from("{\"intercept_a\": 1}")).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));

    let (status, _) = call(&app, "POST", "/v1/chain", Body::from("not json\n")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/health").await.1["head"], 400);
}
