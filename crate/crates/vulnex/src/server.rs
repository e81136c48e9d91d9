//! HTTP/JSON API and static UI hosting.
#![allow(clippy::result_large_err)]

use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use vulnex_core::analytics::{default_matrix_columns, FilterSpec, SortKey, SortSpec, DEFAULT_MATRIX_COLUMNS};
use vulnex_core::enrich::{enrich_graph, FixtureProvider, MetaProvider};
use vulnex_core::graph::{build_graph, dependency_graph_view, OrgGraph, TreeOrdering};
use vulnex_core::ingest::{canonical_json, ingest_directory};
use vulnex_core::model::{CveId, EntityRef, RepoId};
use vulnex_core::snapshot::Snapshot;
use vulnex_core::view::{render_view_with_limit, ViewError, ViewRequest, DEFAULT_MAX_PAGE_SIZE};

const FALLBACK_INDEX: &str = "<!doctype html>
<html lang=\"en\">
<head><meta charset=\"utf-8\"><title>vulnex</title></head>
<body>
<h1>vulnex</h1>
<p>No UI bundle is installed. The JSON API is available under <code>/api/</code>:
<code>/api/views/repositories</code>, <code>/api/views/libraries</code>, <code>/api/views/bugs</code>,
<code>/api/graph/{repositoryId}</code>, <code>/api/matrix/defaults</code>.</p>
</body>
</html>
";

pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    providers: Vec<FixtureProvider>,
    ui_dir: Option<PathBuf>,
    max_page_size: usize,
}

impl AppState {
    pub fn new(graph: Option<OrgGraph>, providers: Vec<FixtureProvider>, ui_dir: Option<PathBuf>) -> Self {
        let state = Self { snapshot: RwLock::new(None), providers, ui_dir, max_page_size: DEFAULT_MAX_PAGE_SIZE };
        if let Some(g) = graph {
            state.install(g);
        }
        state
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().unwrap().clone()
    }

    /// Enriches `g` and swaps it in. Requests already holding the previous
    /// snapshot finish against it.
    pub fn install(&self, g: OrgGraph) {
        let providers: Vec<&dyn MetaProvider> = self.providers.iter().map(|p| p as &dyn MetaProvider).collect();
        let snapshot = Arc::new(Snapshot::new(enrich_graph(&g, &providers)));
        *self.snapshot.write().unwrap() = Some(snapshot);
    }
}

pub type SharedState = Arc<AppState>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/status", get(status))
        .route("/api/views/{view}", get(view_get).post(view_post))
        .route("/api/graph/{repository_id}", get(graph_view))
        .route("/api/matrix/defaults", get(matrix_defaults))
        .route("/api/ingest", post(reingest))
        .fallback(get(static_file))
        .with_state(state)
}

fn json(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, message: impl std::fmt::Display) -> Response {
    json(status, canonical_json(&serde_json::json!({ "error": message.to_string() })))
}

fn loaded(state: &AppState) -> Result<Arc<Snapshot>, Response> {
    state.current().ok_or_else(|| error(StatusCode::CONFLICT, "no graph loaded"))
}

async fn status(State(state): State<SharedState>) -> Response {
    let body = match state.current() {
        Some(s) => serde_json::json!({
            "loaded": true,
            "repositories": s.graph().repositories().count(),
            "libraries": s.graph().libraries().count(),
            "vulnerabilities": s.graph().vulnerabilities().count(),
        }),
        None => serde_json::json!({ "loaded": false }),
    };
    json(StatusCode::OK, canonical_json(&body))
}

fn parse_view(view: &str) -> Result<TreeOrdering, Response> {
    view.parse().map_err(|e: String| error(StatusCode::BAD_REQUEST, e))
}

fn respond_view(state: &AppState, req: ViewRequest) -> Response {
    let snapshot = match loaded(state) {
        Ok(s) => s,
        Err(r) => return r,
    };
    match render_view_with_limit(&snapshot, &req, state.max_page_size) {
        Ok(resp) => json(StatusCode::OK, resp.to_canonical_json()),
        Err(e @ (ViewError::Invalid(_) | ViewError::Analytics(_))) => error(StatusCode::BAD_REQUEST, e),
    }
}

fn flag(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "" | "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(format!("{key}: expected true or false, got {other:?}")),
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("{key}: not a number: {value:?}"))
}

/// Builds a view request from query parameters. Parameter names follow the
/// JSON request body; `expand` may repeat and holds `kind:id` segments
/// joined by `>`, `matrixColumns` is comma-separated.
pub fn request_from_query(view: TreeOrdering, params: &[(String, String)]) -> Result<ViewRequest, String> {
    let mut req = ViewRequest::new(view);
    let mut f = FilterSpec::default();
    let mut sort_key = None;
    let mut direction = None;
    for (key, value) in params {
        let v = value.as_str();
        match key.as_str() {
            "nameQuery" => f.name_query = Some(value.clone()),
            "minDependencies" => f.min_dependencies = Some(number(key, v)?),
            "maxDependencies" => f.max_dependencies = Some(number(key, v)?),
            "minVulnerabilities" => f.min_vulnerabilities = Some(number(key, v)?),
            "maxVulnerabilities" => f.max_vulnerabilities = Some(number(key, v)?),
            "minCvss" => f.min_cvss = Some(number(key, v)?),
            "maxCvss" => f.max_cvss = Some(number(key, v)?),
            "hideVulnerabilityFree" => f.hide_vulnerability_free = flag(key, v)?,
            "hideUnscoredCves" => f.hide_unscored_cves = flag(key, v)?,
            "sort" => sort_key = Some(v.parse::<SortKey>()?),
            "direction" => direction = Some(v.parse()?),
            "expandAll" => req.expand_all = flag(key, v)?,
            "expand" => req.expand.push(
                v.split('>')
                    .map(|seg| EntityRef::parse(seg.trim()).ok_or_else(|| format!("expand: malformed segment {seg:?}")))
                    .collect::<Result<_, _>>()?,
            ),
            "matrixColumns" => {
                req.matrix_columns = Some(
                    v.split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| CveId::parse(s.trim()).map_err(|e| e.to_string()))
                        .collect::<Result<_, _>>()?,
                )
            }
            "page" => req.page = Some(number(key, v)?),
            "pageSize" => req.page_size = Some(number(key, v)?),
            other => return Err(format!("unknown query parameter {other:?}")),
        }
    }
    req.filter = f;
    if let Some(key) = sort_key {
        req.sort = SortSpec { key, direction: direction.unwrap_or(key.default_direction()) };
    } else if let Some(d) = direction {
        req.sort.direction = d;
    }
    Ok(req)
}

async fn view_get(State(state): State<SharedState>, Path(view): Path<String>, Query(params): Query<Vec<(String, String)>>) -> Response {
    let view = match parse_view(&view) {
        Ok(v) => v,
        Err(r) => return r,
    };
    match request_from_query(view, &params) {
        Ok(req) => respond_view(&state, req),
        Err(e) => error(StatusCode::BAD_REQUEST, e),
    }
}

async fn view_post(State(state): State<SharedState>, Path(view): Path<String>, body: Bytes) -> Response {
    let view = match parse_view(&view) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let mut req: ViewRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ViewRequest::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error(StatusCode::BAD_REQUEST, e),
        }
    };
    req.view = view;
    respond_view(&state, req)
}

async fn graph_view(State(state): State<SharedState>, Path(repository_id): Path<String>) -> Response {
    let snapshot = match loaded(&state) {
        Ok(s) => s,
        Err(r) => return r,
    };
    match dependency_graph_view(snapshot.graph(), &RepoId::new(repository_id)) {
        Ok(layers) => json(StatusCode::OK, canonical_json(&layers)),
        Err(e) => error(StatusCode::NOT_FOUND, e),
    }
}

async fn matrix_defaults(State(state): State<SharedState>) -> Response {
    let snapshot = match loaded(&state) {
        Ok(s) => s,
        Err(r) => return r,
    };
    match default_matrix_columns(snapshot.graph(), DEFAULT_MATRIX_COLUMNS) {
        Ok(cols) => json(StatusCode::OK, canonical_json(&cols)),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct IngestBody {
    directory: PathBuf,
}

async fn reingest(State(state): State<SharedState>, body: Bytes) -> Response {
    let body: IngestBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        let (docs, report) = ingest_directory(&body.directory).map_err(|e| (StatusCode::BAD_REQUEST, e.to_string()))?;
        let g = build_graph(&docs).map_err(|e| (StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        worker.install(g);
        Ok::<_, (StatusCode, String)>(report)
    })
    .await;
    match result {
        Ok(Ok(report)) => json(StatusCode::OK, canonical_json(&report)),
        Ok(Err((status, message))) => error(status, message),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

fn content_type(path: &FsPath) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(state): State<SharedState>, uri: axum::http::Uri) -> Response {
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel_path = FsPath::new(rel);
    if rel.starts_with("api/") || !rel_path.components().all(|c| matches!(c, Component::Normal(_))) {
        return error(StatusCode::NOT_FOUND, format!("no route for /{rel}"));
    }
    if let Some(dir) = &state.ui_dir {
        let full = dir.join(rel_path);
        if let Ok(bytes) = tokio::fs::read(&full).await {
            return ([(header::CONTENT_TYPE, content_type(&full))], bytes).into_response();
        }
    }
    if rel == "index.html" {
        return ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], FALLBACK_INDEX).into_response();
    }
    error(StatusCode::NOT_FOUND, format!("no such file /{rel}"))
}
