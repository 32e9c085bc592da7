use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use carbid_core::{Address, ContractError, Hash32, Transaction};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use crate::service::{NodeHandle, SubmitError, TxLookup};

const MAX_POLL: Duration = Duration::from_secs(60);
const DEFAULT_EVENT_LIMIT: usize = 1000;

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code,
            message: message.into(),
        }
    }

    fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code,
            message: message.into(),
        }
    }
}

impl From<ContractError> for ApiError {
    fn from(e: ContractError) -> Self {
        ApiError::not_found(e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "code": self.code, "message": self.message }));
        (self.status, body).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn parse_id(raw: &str, what: &str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_request("BadId", format!("{what} id must be an unsigned integer, got {raw:?}")))
}

/// HTTP routes over a running node, with permissive CORS for browser clients.
pub fn router(node: NodeHandle) -> Router {
    Router::new()
        .route("/tx", post(submit_tx))
        .route("/tx/{hash}", get(get_tx))
        .route("/cars", get(list_cars))
        .route("/cars/{id}", get(get_car))
        .route("/cars/{id}/price", get(get_price))
        .route("/auctions", get(list_auctions))
        .route("/auctions/{id}", get(get_auction))
        .route("/accounts/{addr}", get(get_account))
        .route("/chain/head", get(get_head))
        .route("/events", get(get_events))
        .layer(CorsLayer::permissive())
        .with_state(node)
}

/// Serves [`router`] on `listener` until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, node: NodeHandle) -> std::io::Result<()> {
    axum::serve(listener, router(node)).await
}

async fn submit_tx(State(node): State<NodeHandle>, body: Bytes) -> Response {
    let tx: Transaction = match serde_json::from_slice(&body) {
        Ok(tx) => tx,
        Err(e) => return ApiError::bad_request("Malformed", e.to_string()).into_response(),
    };
    let tx_hash = tx.hash();
    match node.submit(tx).await {
        Ok(hash) => Json(json!({ "accepted": true, "tx_hash": hash })).into_response(),
        Err(SubmitError::Rejected(e)) => {
            let body = json!({
                "accepted": false,
                "tx_hash": tx_hash,
                "code": e.code(),
                "reason": e.code(),
                "message": e.to_string(),
            });
            (StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response()
        }
        Err(SubmitError::Stopped) => ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            code: "Stopped",
            message: "node is shutting down".into(),
        }
        .into_response(),
    }
}

async fn get_tx(State(node): State<NodeHandle>, Path(raw): Path<String>) -> ApiResult {
    let hash: Hash32 = raw
        .parse()
        .map_err(|_| ApiError::bad_request("BadHash", format!("not a 32-byte hex hash: {raw:?}")))?;
    match node.lookup_tx(&hash) {
        Some(TxLookup::Pending) => Ok(Json(json!({ "tx_hash": hash, "status": "pending" }))),
        Some(TxLookup::Included(r)) => {
            let mut v = serde_json::to_value(&r).expect("receipt serializes");
            v["status"] = json!(match r.revert {
                Some(_) => "reverted",
                None => "applied",
            });
            Ok(Json(v))
        }
        None => Err(ApiError::not_found("UnknownTx", format!("no transaction {hash}"))),
    }
}

fn car_json(car: &carbid_core::Car) -> Value {
    let mut v = serde_json::to_value(car).expect("car serializes");
    v["accident_total"] = json!(car.accident_total() as u64);
    v["tprice"] = json!(car.estimated_price());
    v
}

async fn list_cars(State(node): State<NodeHandle>) -> ApiResult {
    let snap = node.snapshot();
    let cars: Vec<Value> = snap.state.registry.cars.values().map(car_json).collect();
    Ok(Json(json!({ "cars": cars })))
}

async fn get_car(State(node): State<NodeHandle>, Path(raw): Path<String>) -> ApiResult {
    let id = parse_id(&raw, "car")?;
    let snap = node.snapshot();
    Ok(Json(car_json(snap.state.registry.get_car_info(id)?)))
}

async fn get_price(State(node): State<NodeHandle>, Path(raw): Path<String>) -> ApiResult {
    let id = parse_id(&raw, "car")?;
    let tprice = node.snapshot().state.registry.calculate_price(id)?;
    Ok(Json(json!({ "car_id": id, "tprice": tprice })))
}

async fn list_auctions(State(node): State<NodeHandle>) -> ApiResult {
    let snap = node.snapshot();
    let now = snap.head.timestamp;
    let auctions: Vec<_> = snap
        .state
        .auctions
        .auctions
        .keys()
        .map(|&id| snap.state.query_auction(id, now).expect("listed id exists"))
        .collect();
    Ok(Json(json!({ "auctions": auctions, "head_timestamp": now })))
}

async fn get_auction(State(node): State<NodeHandle>, Path(raw): Path<String>) -> ApiResult {
    let id = parse_id(&raw, "auction")?;
    let snap = node.snapshot();
    let view = snap.state.query_auction(id, snap.head.timestamp)?;
    let mut v = serde_json::to_value(view).expect("auction serializes");
    v["head_timestamp"] = json!(snap.head.timestamp);
    Ok(Json(v))
}

async fn get_account(State(node): State<NodeHandle>, Path(raw): Path<String>) -> ApiResult {
    let addr: Address = raw
        .parse()
        .map_err(|_| ApiError::bad_request("BadAddress", format!("not a 20-byte hex address: {raw:?}")))?;
    let snap = node.snapshot();
    let acct = snap.state.account(&addr);
    Ok(Json(json!({
        "address": addr,
        "balance": acct.balance,
        "nonce": acct.nonce,
        "pending_nonce": snap.pending_nonce(&addr),
    })))
}

async fn get_head(State(node): State<NodeHandle>) -> ApiResult {
    Ok(Json(json!(node.snapshot().head)))
}

#[derive(Debug, Deserialize)]
struct EventQuery {
    since: Option<String>,
    timeout_ms: Option<String>,
    limit: Option<String>,
}

fn parse_param(raw: &Option<String>, name: &str, default: u64) -> Result<u64, ApiError> {
    match raw {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| ApiError::bad_request("BadCursor", format!("{name} must be an unsigned integer, got {s:?}"))),
    }
}

async fn get_events(State(node): State<NodeHandle>, Query(q): Query<EventQuery>) -> ApiResult {
    let since = parse_param(&q.since, "since", 0)?;
    let timeout = Duration::from_millis(parse_param(&q.timeout_ms, "timeout_ms", 0)?).min(MAX_POLL);
    let limit = parse_param(&q.limit, "limit", DEFAULT_EVENT_LIMIT as u64)?;
    if limit == 0 {
        return Err(ApiError::bad_request("BadCursor", "limit must be positive"));
    }
    let total = node.event_count();
    if since > total {
        return Err(ApiError::bad_request(
            "BadCursor",
            format!("cursor {since} is past the latest event {total}"),
        ));
    }
    let events = node.wait_events(since, limit as usize, timeout).await;
    let next = events.last().map(|e| e.seq).unwrap_or(since);
    Ok(Json(json!({ "events": events, "next": next })))
}
