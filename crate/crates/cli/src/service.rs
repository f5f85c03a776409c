//! HTTP API for the annotator: trace browsing, corrections, repair and
//! replay over one in-memory session.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use indexmap::IndexMap;
use serde::Deserialize;
use serde_json::{json, Value as JsonValue};
use srtr_core::dsl::{parse_corrections, parse_params, ParamMap};
use srtr_core::interp::step_transition;
use srtr_core::peval::classify_params;
use srtr_core::repair::{srtr, RepairOptions};
use tower_http::services::ServeDir;

use crate::{report_text, CliError, Session};

pub type Shared = Arc<RwLock<Session>>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    err: CliError,
}

impl ApiError {
    fn bad(err: impl Into<CliError>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, err: err.into() }
    }

    fn schema(detail: impl Into<String>) -> Self {
        ApiError::bad(CliError::new("SchemaError", detail))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.err.kind, "detail": self.err.detail}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn read(s: &Shared) -> std::sync::RwLockReadGuard<'_, Session> {
    s.read().unwrap_or_else(|e| e.into_inner())
}

fn write(s: &Shared) -> std::sync::RwLockWriteGuard<'_, Session> {
    s.write().unwrap_or_else(|e| e.into_inner())
}

fn body_json(body: &Bytes) -> ApiResult<Option<JsonValue>> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(None);
    }
    serde_json::from_slice(body).map(Some).map_err(|e| ApiError::schema(format!("request body: {e}")))
}

pub fn router(session: Session, static_dir: Option<PathBuf>) -> Router {
    let state: Shared = Arc::new(RwLock::new(session));
    let api = Router::new()
        .route("/api/rsm", get(rsm))
        .route("/api/trace", get(trace))
        .route("/api/params", get(get_params).post(set_params))
        .route("/api/corrections", get(list_corrections).post(add_correction))
        .route("/api/corrections/{i}", delete(remove_correction))
        .route("/api/repair", post(repair))
        .route("/api/history", get(history))
        .route("/api/replay", post(replay))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(session: Session, addr: SocketAddr, static_dir: Option<PathBuf>) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::new("IOError", format!("{addr}: {e}")))?;
    println!("listening on http://{}", listener.local_addr().map_err(|e| CliError::new("IOError", e.to_string()))?);
    axum::serve(listener, router(session, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::new("IOError", e.to_string()))
}

async fn rsm(State(s): State<Shared>) -> Json<JsonValue> {
    let s = read(&s);
    let cls = classify_params(&s.rsm);
    let inputs: IndexMap<&String, String> = s.rsm.inputs.iter().map(|(n, t)| (n, t.to_string())).collect();
    Json(json!({
        "source": s.source,
        "states": s.rsm.states,
        "start": s.rsm.start,
        "end": s.rsm.end,
        "inputs": inputs,
        "params": s.rsm.params,
        "repairable": cls.rep,
        "unrepairable": cls.unrep,
    }))
}

#[derive(Debug, Deserialize)]
struct Range {
    from: Option<u64>,
    to: Option<u64>,
}

/// Elements with `from <= t < to`.
async fn trace(State(s): State<Shared>, Query(r): Query<Range>) -> ApiResult<Json<JsonValue>> {
    let s = read(&s);
    let (from, to) = (r.from.unwrap_or(0), r.to.unwrap_or(u64::MAX));
    if from > to {
        return Err(ApiError::bad(CliError::new("InvalidRange", format!("from={from} is after to={to}"))));
    }
    let last = s.trace.elements().last().map(|e| e.t);
    if r.from.is_some() && last.is_none_or(|l| from > l) {
        return Err(ApiError {
            status: StatusCode::NOT_FOUND,
            err: CliError::new("IndexError", format!("no trace element at or after t = {from}")),
        });
    }
    let els: Vec<JsonValue> = s.trace.elements().iter().filter(|e| e.t >= from && e.t < to).map(|e| e.to_json()).collect();
    Ok(Json(JsonValue::Array(els)))
}

fn params_json(p: &ParamMap) -> JsonValue {
    serde_json::to_value(p).expect("params serialize")
}

async fn get_params(State(s): State<Shared>) -> Json<JsonValue> {
    Json(params_json(&read(&s).params))
}

/// Accepts a new parameter map for the session.
async fn set_params(State(s): State<Shared>, body: Bytes) -> ApiResult<Json<JsonValue>> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::schema(e.to_string()))?;
    let mut s = write(&s);
    let p = parse_params(text, &s.rsm).map_err(ApiError::bad)?;
    s.params = p;
    Ok(Json(params_json(&s.params)))
}

fn corrections_json(s: &Session) -> JsonValue {
    json!(s.corrections.iter().map(|c| json!({"t": c.t, "expected": c.expected})).collect::<Vec<_>>())
}

async fn list_corrections(State(s): State<Shared>) -> Json<JsonValue> {
    Json(corrections_json(&read(&s)))
}

async fn add_correction(State(s): State<Shared>, body: Bytes) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let Some(v) = body_json(&body)? else { return Err(ApiError::schema("expected {\"t\": int, \"expected\": str}")) };
    let mut s = write(&s);
    let mut cs = parse_corrections(&JsonValue::Array(vec![v]).to_string(), &s.rsm).map_err(ApiError::bad)?;
    let c = cs.remove(0);
    if s.trace.get(c.t).is_none() {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            err: CliError::new("IndexError", format!("t = {} is outside the trace", c.t)),
        });
    }
    s.corrections.push(c);
    Ok((StatusCode::CREATED, Json(json!({"index": s.corrections.len() - 1, "corrections": corrections_json(&s)}))))
}

async fn remove_correction(State(s): State<Shared>, Path(i): Path<usize>) -> ApiResult<Json<JsonValue>> {
    let mut s = write(&s);
    if i >= s.corrections.len() {
        return Err(ApiError {
            status: StatusCode::NOT_FOUND,
            err: CliError::new("IndexError", format!("no correction at index {i}")),
        });
    }
    s.corrections.remove(i);
    Ok(Json(corrections_json(&s)))
}

fn repair_options(v: Option<JsonValue>) -> ApiResult<RepairOptions> {
    let mut opts = RepairOptions::default();
    let Some(v) = v else { return Ok(opts) };
    let obj = v.as_object().ok_or_else(|| ApiError::schema("repair body must be an object"))?;
    for (k, v) in obj {
        let num = |v: &JsonValue| v.as_f64().ok_or_else(|| ApiError::schema(format!("{k} must be a number")));
        match k.as_str() {
            "penalty" => opts.penalty = num(v)?,
            "epsilon" => opts.epsilon = num(v)?,
            "bounds" => {
                let b = v.as_object().ok_or_else(|| ApiError::schema("bounds must map names to [lo, hi]"))?;
                for (name, range) in b {
                    let pair = range.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                        ApiError::schema(format!("bound for {name} must be [lo, hi]"))
                    })?;
                    let end = |x: &JsonValue, inf: f64| if x.is_null() { Ok(inf) } else { num(x) };
                    opts.bounds.insert(name.clone(), (end(&pair[0], f64::NEG_INFINITY)?, end(&pair[1], f64::INFINITY)?));
                }
            }
            _ => return Err(ApiError::schema(format!("unknown field {k:?}"))),
        }
    }
    Ok(opts)
}

/// Repairs against the current corrections without touching the session's
/// parameters; the body is the same report `srtr repair` prints.
async fn repair(State(s): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let opts = repair_options(body_json(&body)?)?;
    let snapshot = read(&s).clone();
    let r = srtr(&snapshot.rsm, &snapshot.params, &snapshot.trace, &snapshot.corrections, &opts).map_err(ApiError::bad)?;
    let text = report_text(&r);
    write(&s).history.push(r);
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

/// Every repair so far, with the parameters each one proposed.
async fn history(State(s): State<Shared>) -> Json<JsonValue> {
    let s = read(&s);
    let items: Vec<JsonValue> = s
        .history
        .iter()
        .map(|r| {
            let mut v = r.report_json();
            v["params"] = params_json(&r.params);
            v
        })
        .collect();
    Json(JsonValue::Array(items))
}

/// Next state at every step under the given parameters, or the session's.
async fn replay(State(s): State<Shared>, body: Bytes) -> ApiResult<Json<JsonValue>> {
    let s = read(&s);
    let params = match body_json(&body)? {
        Some(v) => parse_params(&v.to_string(), &s.rsm).map_err(ApiError::bad)?,
        None => s.params.clone(),
    };
    let steps: Vec<JsonValue> = s
        .trace
        .elements()
        .iter()
        .map(|tau| match step_transition(&s.rsm, tau, &params) {
            Ok(next) => json!({"t": tau.t, "state": tau.state, "next": next}),
            Err(e) => json!({"t": tau.t, "state": tau.state, "error": e.kind(), "detail": e.to_string()}),
        })
        .collect();
    Ok(Json(json!({"params": params_json(&params), "steps": steps})))
}
