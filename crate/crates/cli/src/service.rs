//! HTTP front end: `POST /ask` and `GET /healthz`.
//!
//! Requests run on the blocking pool; a semaphore caps how many resolve at
//! once and the rest queue.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kgqa_core::kgclient::ResultTable;
use kgqa_core::pipeline::Timings;
use kgqa_core::{Answer, AskOptions, Config, Pipeline, Status, TraceEvent};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

/// Keys a request may override; everything else is fixed at startup.
pub const REQUEST_OVERRIDABLE: &[&str] = &[
    "temperature",
    "top_p",
    "beam_width",
    "keep_skeletons",
    "search_top_k",
    "max_steps",
    "question_timeout_secs",
    "kg_timeout_secs",
    "candidate_limit",
    "max_tokens",
    "ranker",
    "scoring",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    pub question: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub verbose: bool,
    #[serde(default)]
    pub gold_sparql: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparql: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<Option<String>>>>,
    pub timings: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEvent>>,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl AskResponse {
    pub fn from_answer(answer: Answer, verbose: bool, config_hash: String) -> Self {
        let (variables, rows) = match answer.result {
            Some(ResultTable { variables, rows, .. }) => (Some(variables), Some(rows)),
            None => (None, None),
        };
        Self {
            status: answer.status,
            sparql: answer.sparql,
            variables,
            rows,
            timings: answer.timings,
            trace: verbose.then_some(answer.trace),
            config_hash,
            reason: answer.reason,
        }
    }

    fn timeout(config_hash: String) -> Self {
        Self {
            status: Status::NoValidQuery,
            sparql: None,
            variables: None,
            rows: None,
            timings: Timings::default(),
            trace: None,
            config_hash,
            reason: Some("timeout".into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub ok: bool,
    pub entities: usize,
    pub properties: usize,
    pub kg_reachable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lm_reachable: Option<bool>,
    pub config_hash: String,
}

#[derive(Clone)]
pub struct AppState {
    pipeline: Arc<Pipeline>,
    permits: Arc<Semaphore>,
}

impl AppState {
    pub fn new(pipeline: Arc<Pipeline>, workers: usize) -> Self {
        Self {
            pipeline,
            permits: Arc::new(Semaphore::new(workers.max(1))),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/ask", post(ask))
        .route("/healthz", get(healthz))
        .with_state(state)
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn override_args(overrides: &BTreeMap<String, serde_json::Value>) -> Result<Vec<String>, ApiError> {
    overrides
        .iter()
        .map(|(k, v)| {
            let top = k.split('.').next().unwrap_or(k);
            if !REQUEST_OVERRIDABLE.contains(&top) {
                return Err(bad_request(format!("{k} cannot be overridden per request")));
            }
            let raw = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(_) | serde_json::Value::Bool(_) => v.to_string(),
                _ => return Err(bad_request(format!("override {k} must be a string, number or boolean"))),
            };
            Ok(format!("{k}={raw}"))
        })
        .collect()
}

fn effective_config(base: &Config, req: &AskRequest) -> Result<Option<Config>, ApiError> {
    if req.overrides.is_empty() {
        return Ok(None);
    }
    let args = override_args(&req.overrides)?;
    base.with_overrides(&args)
        .map(Some)
        .map_err(|e| bad_request(e.to_string()))
}

async fn ask(State(state): State<AppState>, body: Bytes) -> Result<Json<AskResponse>, ApiError> {
    let req: AskRequest = serde_json::from_slice(&body).map_err(|e| bad_request(format!("malformed request: {e}")))?;
    if req.question.trim().is_empty() {
        return Err(bad_request("question must not be empty"));
    }
    let base = state.pipeline.config();
    let cfg = effective_config(base, &req)?;
    let effective = cfg.as_ref().unwrap_or(base);
    let hash = effective.hash();
    let budget = effective.question_timeout() + Duration::from_secs(1);

    let _permit = state
        .permits
        .clone()
        .acquire_owned()
        .await
        .map_err(|_| ApiError(StatusCode::SERVICE_UNAVAILABLE, "shutting down".into()))?;
    let pipeline = state.pipeline.clone();
    let question = req.question.clone();
    let opts = AskOptions {
        gold_sparql: req.gold_sparql.clone(),
        config: cfg,
    };
    let task = tokio::task::spawn_blocking(move || pipeline.answer(&question, &opts));
    let answer = match tokio::time::timeout(budget, task).await {
        Err(_) => return Ok(Json(AskResponse::timeout(hash))),
        Ok(Err(join)) => return Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, join.to_string())),
        Ok(Ok(result)) => result,
    };
    match answer {
        Ok(a) => Ok(Json(AskResponse::from_answer(a, req.verbose, hash))),
        Err(e) if e.is_unavailable() => Err(ApiError(StatusCode::SERVICE_UNAVAILABLE, e.to_string())),
        Err(e) => Err(bad_request(e.to_string())),
    }
}

async fn healthz(State(state): State<AppState>) -> (StatusCode, Json<Health>) {
    let pipeline = state.pipeline.clone();
    let ready = tokio::task::spawn_blocking(move || pipeline.ready()).await.ok();
    let p = &state.pipeline;
    let health = Health {
        ok: ready.is_some_and(|r| r.ok()),
        entities: p.indices().entities.len(),
        properties: p.indices().properties.len(),
        kg_reachable: ready.is_some_and(|r| r.kg),
        lm_reachable: ready.and_then(|r| r.lm),
        config_hash: p.config().hash(),
    };
    let code = if health.ok {
        StatusCode::OK
    } else {
        StatusCode::SERVICE_UNAVAILABLE
    };
    (code, Json(health))
}

/// Binds and serves until ctrl-c. `pipeline` must be built beforehand,
/// outside any async context.
pub fn serve_blocking(pipeline: Pipeline, addr: &str) -> anyhow::Result<()> {
    let workers = pipeline.config().workers;
    let pipeline = Arc::new(pipeline);
    let state = AppState::new(pipeline.clone(), workers);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let served = rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    });
    drop(rt);
    drop(pipeline);
    served
}
