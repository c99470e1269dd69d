//! JSON-over-HTTP API for the rules and recommendations of one loaded model.
//!
//! ```text
//! GET  /api/datasets                          uploaded tables
//! POST /api/datasets                          upload CSV (header row) or table JSON
//! GET  /api/datasets/{id}/table?rows=N        first N rows (default 10)
//! GET  /api/datasets/{id}/recommendations?k=K top K charts with applied rules
//! GET  /api/rules?per_type=N                  displayed rules by chart type
//! GET  /api/meta                              model fingerprint and registry version
//! ```

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use vizkg_core::corpus::{self, Diagnostic, ParseReport, Table, VisType};
use vizkg_core::features::REGISTRY_VERSION;
use vizkg_core::infer::{self, Rule};
use vizkg_core::model::VisModel;

use crate::store::DatasetStore;

/// Rules shown per chart type by default and used for match tags.
pub const DISPLAY_PER_TYPE: usize = 5;
pub const DEFAULT_ROWS: usize = 10;
pub const DEFAULT_K: usize = 3;
const MAX_UPLOAD_BYTES: usize = 64 << 20;

pub struct AppState {
    model: VisModel,
    fingerprint: String,
    /// Every pruned chart-type rule, best first within each type.
    ranked_rules: BTreeMap<VisType, Vec<Rule>>,
    displayed: BTreeMap<VisType, Vec<Rule>>,
    store: RwLock<DatasetStore>,
}

impl AppState {
    pub fn new(model: VisModel, store: DatasetStore) -> anyhow::Result<Self> {
        let rules = infer::generate_rules(&model)?;
        let ranked_rules = infer::top_rules(&rules, usize::MAX)?;
        let displayed = truncate(&ranked_rules, DISPLAY_PER_TYPE);
        Ok(AppState {
            fingerprint: model.fingerprint()?,
            model,
            ranked_rules,
            displayed,
            store: RwLock::new(store),
        })
    }
}

fn truncate(groups: &BTreeMap<VisType, Vec<Rule>>, per_type: usize) -> BTreeMap<VisType, Vec<Rule>> {
    groups
        .iter()
        .map(|(v, rules)| (*v, rules.iter().take(per_type).cloned().collect()))
        .collect()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/datasets", get(list_datasets).post(upload_dataset))
        .route("/api/datasets/{id}/table", get(dataset_table))
        .route("/api/datasets/{id}/recommendations", get(recommendations))
        .route("/api/rules", get(rules))
        .route("/api/meta", get(meta))
        .fallback(|| async { ApiError::NotFound("no such endpoint".into()) })
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest { message: String, report: Option<ParseReport> },
    Internal(anyhow::Error),
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::BadRequest {
            message: message.into(),
            report: None,
        }
    }
}

impl From<vizkg_core::Error> for ApiError {
    fn from(e: vizkg_core::Error) -> Self {
        match e {
            vizkg_core::Error::InvalidInput(m) => ApiError::bad_request(m),
            vizkg_core::Error::NoFeaturesMatched => ApiError::bad_request(e.to_string()),
            other => ApiError::Internal(other.into()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::NotFound(message) => (StatusCode::NOT_FOUND, Json(json!({ "error": message }))).into_response(),
            ApiError::BadRequest { message, report } => {
                let mut body = json!({ "error": message });
                if let Some(r) = report {
                    body["report"] = json!(r);
                }
                (StatusCode::BAD_REQUEST, Json(body)).into_response()
            }
            ApiError::Internal(e) => {
                let id = uuid::Uuid::new_v4().simple().to_string();
                log::error!("request failed [{id}]: {e:#}");
                let body = json!({ "error": "internal error", "diagnostic_id": id });
                (StatusCode::INTERNAL_SERVER_ERROR, Json(body)).into_response()
            }
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn list_datasets(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!(state.store.read().expect("store lock").list()))
}

#[derive(Deserialize)]
struct UploadParams {
    name: Option<String>,
}

/// Line of the source the parser stopped at, when it says.
fn error_line(e: &vizkg_core::Error) -> usize {
    match e {
        vizkg_core::Error::Json(j) => j.line(),
        vizkg_core::Error::Csv(c) => c.position().map_or(1, |p| p.line() as usize),
        _ => 1,
    }
}

fn parse_upload(headers: &HeaderMap, body: &[u8]) -> ApiResult<Table> {
    let text = std::str::from_utf8(body).map_err(|e| ApiError::bad_request(format!("body is not UTF-8: {e}")))?;
    let json_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("json"));
    let is_json = json_type || text.trim_start().starts_with('{');
    let parsed = if is_json {
        corpus::parse_table_json(text, "")
    } else {
        corpus::parse_csv_table(text.as_bytes(), "")
    };
    parsed.map_err(|e| ApiError::BadRequest {
        message: format!("could not parse {} upload", if is_json { "JSON" } else { "CSV" }),
        report: Some(ParseReport {
            diagnostics: vec![Diagnostic {
                line: error_line(&e),
                message: e.to_string(),
            }],
        }),
    })
}

async fn upload_dataset(
    State(state): State<Arc<AppState>>,
    Query(params): Query<UploadParams>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let table = parse_upload(&headers, &body)?;
    let name = params
        .name
        .or_else(|| (!table.id.is_empty()).then(|| table.id.clone()))
        .unwrap_or_else(|| "upload".into());
    let id = state
        .store
        .write()
        .expect("store lock")
        .insert(name, table)
        .map_err(ApiError::Internal)?;
    log::info!("stored dataset {id}");
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

fn dataset(state: &AppState, id: &str) -> ApiResult<(String, Table)> {
    let store = state.store.read().expect("store lock");
    let d = store
        .get(id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown dataset {id}")))?;
    Ok((d.name.clone(), d.table.clone()))
}

#[derive(Deserialize)]
struct RowsParams {
    rows: Option<usize>,
}

async fn dataset_table(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<RowsParams>,
) -> ApiResult<Json<Value>> {
    let (name, table) = dataset(&state, &id)?;
    let n = params.rows.unwrap_or(DEFAULT_ROWS).min(table.n_rows());
    let rows: Vec<Vec<Value>> = (0..n)
        .map(|r| {
            table
                .columns
                .iter()
                .map(|c| c.values.get(r).map_or(Value::Null, |v| v.to_json()))
                .collect()
        })
        .collect();
    let columns: Vec<Value> = table
        .columns
        .iter()
        .map(|c| json!({"name": c.name, "general_type": c.general_type, "specific_type": c.specific_type}))
        .collect();
    Ok(Json(json!({
        "id": id,
        "name": name,
        "n_rows": table.n_rows(),
        "columns": columns,
        "rows": rows,
    })))
}

#[derive(Deserialize)]
struct RecommendParams {
    k: Option<usize>,
}

async fn recommendations(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<RecommendParams>,
) -> ApiResult<Json<Value>> {
    let (_, table) = dataset(&state, &id)?;
    let k = params.k.unwrap_or(DEFAULT_K);
    let worker = Arc::clone(&state);
    let output = tokio::task::spawn_blocking(move || infer::recommend(&worker.model, &table, k, &worker.displayed))
        .await
        .map_err(|e| ApiError::Internal(e.into()))??;
    let mut body = serde_json::to_value(&output).map_err(|e| ApiError::Internal(e.into()))?;
    body["dataset"] = json!(id);
    Ok(Json(body))
}

#[derive(Deserialize)]
struct RulesParams {
    per_type: Option<usize>,
}

async fn rules(State(state): State<Arc<AppState>>, Query(params): Query<RulesParams>) -> ApiResult<Json<Value>> {
    let per_type = params.per_type.unwrap_or(DISPLAY_PER_TYPE);
    if per_type == 0 {
        return Err(ApiError::bad_request("per_type must be at least 1"));
    }
    Ok(Json(json!(truncate(&state.ranked_rules, per_type))))
}

async fn meta(State(state): State<Arc<AppState>>) -> Json<Value> {
    let e = &state.model.embedding;
    Json(json!({
        "fingerprint": state.fingerprint,
        "registry_version": REGISTRY_VERSION,
        "scorer": e.scorer,
        "norm": e.norm,
        "dim": e.dim,
        "n_entities": e.n_entities(),
        "n_relations": e.n_relations(),
        "display_per_type": DISPLAY_PER_TYPE,
    }))
}
