use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gastimate::estimator::{self, lookup_table_indexed};
use gastimate::{ingest, LinearModel, LookupTable, PriceCategory, PriceRequest, Timestamp};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::state::{ChainData, SharedState, Snapshot};

/// Upper bound on rows in one lookup response.
pub const MAX_LOOKUP_ROWS: usize = 100_000;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn no_model() -> Self {
        Self::new(StatusCode::CONFLICT, "no_model", "no model has been trained or installed")
    }

    fn no_chain() -> Self {
        Self::new(StatusCode::CONFLICT, "no_chain", "no chain has been ingested")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/lookup", get(lookup))
        .route("/v1/recommend", get(recommend))
        .route("/v1/chain", post(ingest_chain))
        .route("/v1/train", post(train))
        .route("/v1/model", get(get_model).post(put_model))
        .with_state(state)
}

async fn health(State(state): State<SharedState>) -> Json<Value> {
    Json(json!({ "status": "ok", "head": state.snapshot().head() }))
}

#[derive(Debug, Default, Deserialize)]
pub struct PriceRange {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub step: Option<f64>,
}

impl PriceRange {
    fn prices(&self) -> ApiResult<Vec<f64>> {
        let (min, max, step) = (self.min.unwrap_or(1.0), self.max.unwrap_or(60.0), self.step.unwrap_or(1.0));
        if !(step > 0.0) || !(min >= 0.0) || !(max >= min) {
            return Err(ApiError::bad_request("need 0 <= min <= max and step > 0"));
        }
        if (max - min) / step >= MAX_LOOKUP_ROWS as f64 {
            return Err(ApiError::bad_request(format!("at most {MAX_LOOKUP_ROWS} rows per lookup")));
        }
        PriceRequest::Range { min, max, step }.prices().map_err(|e| ApiError::bad_request(e.to_string()))
    }
}

fn build_lookup(snapshot: &Snapshot, range: &PriceRange) -> ApiResult<LookupTable> {
    let prices = range.prices()?;
    let model = snapshot.model.as_ref().ok_or_else(ApiError::no_model)?;
    let chain = snapshot.chain.as_ref().ok_or_else(ApiError::no_chain)?;
    let head = snapshot.head().ok_or_else(ApiError::no_chain)?;
    lookup_table_indexed(model, &chain.view, &chain.index, head, &prices, snapshot.lookback())
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "lookup_unavailable", e.to_string()))
}

async fn lookup(
    State(state): State<SharedState>,
    query: Result<Query<PriceRange>, QueryRejection>,
) -> ApiResult<Json<LookupTable>> {
    let Query(range) = query?;
    Ok(Json(build_lookup(&state.snapshot(), &range)?))
}

#[derive(Debug, Deserialize)]
pub struct RecommendQuery {
    pub deadline_minutes: Option<f64>,
    pub kth: Option<usize>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Recommendation {
    pub gas_price_gwei: f64,
    pub predicted_minutes: f64,
    pub category: PriceCategory,
}

async fn recommend(
    State(state): State<SharedState>,
    query: Result<Query<RecommendQuery>, QueryRejection>,
) -> ApiResult<Json<Recommendation>> {
    let Query(q) = query?;
    let deadline = q.deadline_minutes.ok_or_else(|| ApiError::bad_request("deadline_minutes is required"))?;
    if !(deadline > 0.0) {
        return Err(ApiError::bad_request("deadline_minutes must be positive"));
    }
    let kth = q.kth.unwrap_or(1);
    if kth < 1 {
        return Err(ApiError::bad_request("kth must be at least 1"));
    }
    let range = PriceRange { min: q.min, max: q.max, step: q.step };
    let table = build_lookup(&state.snapshot(), &range)?;
    let row = table.recommend(deadline, kth).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "no_price_meets_deadline",
            format!("fewer than {kth} prices are predicted within {deadline} minutes"),
        )
    })?;
    Ok(Json(Recommendation {
        gas_price_gwei: row.gas_price_gwei,
        predicted_minutes: row.predicted_minutes,
        category: row.category,
    }))
}

/// Replaces the chain with the posted block lines. The model is kept.
async fn ingest_chain(State(state): State<SharedState>, body: String) -> ApiResult<Json<Value>> {
    let view = tokio::task::spawn_blocking(move || ingest::read_chain(body.as_bytes()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let data = Arc::new(ChainData::new(view));
    let _guard = state.lock_writer().await;
    let current = state.snapshot();
    let next = Snapshot { chain: Some(data), model: current.model, trained_at: current.trained_at };
    let meta = next.metadata();
    state.publish(next);
    tracing::info!(head = ?meta.head, blocks = meta.blocks, "chain replaced");
    Ok(Json(serde_json::to_value(meta).unwrap_or(Value::Null)))
}

#[derive(Debug, Default, Deserialize)]
pub struct TrainRequest {
    pub from_ts: Option<Timestamp>,
    pub to_ts: Option<Timestamp>,
    pub lookback: Option<u64>,
}

async fn train(
    State(state): State<SharedState>,
    body: Result<Json<TrainRequest>, JsonRejection>,
) -> ApiResult<Json<LinearModel>> {
    let Json(req) = body?;
    let _guard = state.lock_writer().await;
    let current = state.snapshot();
    let chain = current.chain.clone().ok_or_else(ApiError::no_chain)?;
    let (Some(first), Some(last)) = (chain.view.blocks().first(), chain.view.head()) else {
        return Err(ApiError::no_chain());
    };
    let from = req.from_ts.unwrap_or(first.timestamp);
    let to = req.to_ts.unwrap_or(last.timestamp + 1);
    let lookback = req.lookback.unwrap_or_else(|| current.lookback());
    if lookback == 0 || from >= to {
        return Err(ApiError::bad_request("need lookback > 0 and from_ts < to_ts"));
    }
    let fit_chain = chain.clone();
    let model = tokio::task::spawn_blocking(move || estimator::train(&fit_chain.view, from, to, lookback))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "training_failed", e.to_string()))?;
    state.publish(Snapshot { chain: Some(chain), model: Some(model), trained_at: Some(unix_now()) });
    tracing::info!(a = model.intercept_a, b = model.slope_b, n = model.n_train, "model trained");
    Ok(Json(model))
}

async fn get_model(State(state): State<SharedState>) -> ApiResult<Json<LinearModel>> {
    state.snapshot().model.map(Json).ok_or_else(ApiError::no_model)
}

async fn put_model(
    State(state): State<SharedState>,
    body: Result<Json<LinearModel>, JsonRejection>,
) -> ApiResult<Json<LinearModel>> {
    let Json(model) = body?;
    if !model.is_finite() || model.lookback == 0 {
        return Err(ApiError::bad_request("model coefficients must be finite and lookback positive"));
    }
    let _guard = state.lock_writer().await;
    let current = state.snapshot();
    state.publish(Snapshot { chain: current.chain.clone(), model: Some(model), trained_at: Some(unix_now()) });
    Ok(Json(model))
}

fn unix_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs() as i64)
}
