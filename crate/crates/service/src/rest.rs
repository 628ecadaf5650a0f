//! HTTP/JSON API under `/api/v1`.
//!
//! | route | role | success |
//! |---|---|---|
//! | `GET /quota/{user,group}` | user | 200 list |
//! | `GET /quota/{user,group}/{id}` | user | 200 |
//! | `POST /quota/{user,group}/{id}` | admin | 201 |
//! | `PATCH /quota/{user,group}/{id}` | admin | 200 |
//! | `DELETE /quota/{user,group}/{id}` | admin | 204 |
//! | `PUT /ns/files/{path}` | user | 201, or 507 on quota denial |
//! | `GET`/`DELETE /ns/files/{path}` | user | 200 / 204 |
//! | `PUT /ns/dirs/{path}`, `GET /ns/dirs[/{path}]` | user | 201 / 200 |
//! | `POST /admin/scan` | admin | 200 scan report |

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use quota_core::{
    AuthContext, DirSpec, NamespaceError, QuotaError, QuotaKey, ScanError, ScopeKind,
};
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::config::Config;
use crate::scanner::Scanner;
use crate::service::{QuotaService, ServiceError};
use crate::store::StoreError;
use crate::wire::{CreateDirBody, CreateFileBody, EntryJson, ErrorBody, LimitsBody, PatchBody, QuotaJson, ScanReportJson};

pub const API_BASE: &str = "/api/v1";

#[derive(Clone)]
pub struct AppState {
    pub scanner: Arc<Scanner>,
    pub tokens: Arc<HashMap<String, AuthContext>>,
}

impl AppState {
    pub fn new(scanner: Arc<Scanner>, tokens: HashMap<String, AuthContext>) -> Self {
        Self { scanner, tokens: Arc::new(tokens) }
    }

    fn service(&self) -> &QuotaService {
        self.scanner.service()
    }

    fn caller(&self, headers: &HeaderMap) -> AuthContext {
        headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .and_then(|t| self.tokens.get(t.trim()))
            .cloned()
            .unwrap_or_else(AuthContext::anonymous)
    }
}

#[derive(Debug)]
pub enum ApiError {
    Service(ServiceError),
    BadRequest(String),
    NotFound(String),
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::Service(e)
    }
}

fn status_of(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::Unauthenticated => StatusCode::UNAUTHORIZED,
        ServiceError::Forbidden => StatusCode::FORBIDDEN,
        ServiceError::Namespace(n) => match n {
            NamespaceError::QuotaExceeded(_) => StatusCode::INSUFFICIENT_STORAGE,
            NamespaceError::NotFound(_) => StatusCode::NOT_FOUND,
            NamespaceError::InvalidPath(_) => StatusCode::BAD_REQUEST,
            NamespaceError::AlreadyExists(_)
            | NamespaceError::NotADirectory(_)
            | NamespaceError::NotAFile(_)
            | NamespaceError::DirectoryNotEmpty(_) => StatusCode::CONFLICT,
            NamespaceError::Inconsistent(_) => StatusCode::INTERNAL_SERVER_ERROR,
        },
        ServiceError::Quota(q) => match q {
            QuotaError::AlreadyExists(_) | QuotaError::StaleReport { .. } => StatusCode::CONFLICT,
            QuotaError::NotFound(_) => StatusCode::NOT_FOUND,
            QuotaError::InvalidLimit { .. } => StatusCode::BAD_REQUEST,
        },
        ServiceError::Scan(ScanError::InProgress) => StatusCode::CONFLICT,
        ServiceError::Scan(ScanError::InvalidInterval) => StatusCode::BAD_REQUEST,
        ServiceError::Store(StoreError::StoreFull { .. }) => StatusCode::SERVICE_UNAVAILABLE,
        ServiceError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::Service(e) => (status_of(&e), e.to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
        };
        if status.is_server_error() && status != StatusCode::INSUFFICIENT_STORAGE {
            tracing::error!(%status, %error, "request failed");
        }
        (status, Json(ErrorBody { error })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_kind(kind: &str) -> ApiResult<ScopeKind> {
    match kind {
        "user" => Ok(ScopeKind::User),
        "group" => Ok(ScopeKind::Group),
        other => Err(ApiError::NotFound(format!("no such quota type: {other}"))),
    }
}

fn parse_key(kind: &str, id: &str) -> ApiResult<QuotaKey> {
    let kind = parse_kind(kind)?;
    let id = id.parse().map_err(|_| ApiError::BadRequest(format!("invalid id: {id}")))?;
    Ok(QuotaKey { kind, id })
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid body: {e}")))
}

fn require_admin(caller: &AuthContext) -> ApiResult<()> {
    if !caller.is_authenticated() {
        Err(ServiceError::Unauthenticated.into())
    } else if !caller.is_admin() {
        Err(ServiceError::Forbidden.into())
    } else {
        Ok(())
    }
}

fn require_auth(caller: &AuthContext) -> ApiResult<()> {
    if caller.is_authenticated() { Ok(()) } else { Err(ServiceError::Unauthenticated.into()) }
}

async fn list_quotas(State(st): State<AppState>, Path(kind): Path<String>, headers: HeaderMap) -> ApiResult<Json<Vec<QuotaJson>>> {
    let caller = st.caller(&headers);
    require_auth(&caller)?;
    let kind = parse_kind(&kind)?;
    let quotas = st.service().list_quotas(kind, &caller)?;
    Ok(Json(quotas.iter().map(QuotaJson::from).collect()))
}

async fn get_quota(
    State(st): State<AppState>,
    Path((kind, id)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Json<QuotaJson>> {
    let caller = st.caller(&headers);
    require_auth(&caller)?;
    let key = parse_key(&kind, &id)?;
    Ok(Json(QuotaJson::from(&st.service().get_quota(key, &caller)?)))
}

async fn create_quota(
    State(st): State<AppState>,
    Path((kind, id)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<QuotaJson>)> {
    let caller = st.caller(&headers);
    require_admin(&caller)?;
    let key = parse_key(&kind, &id)?;
    let body: LimitsBody = if body.is_empty() { LimitsBody::default() } else { parse_body(&body)? };
    let limits = body.validate().map_err(ServiceError::from)?;
    let q = st.service().put_quota(key, limits, &caller)?;
    Ok((StatusCode::CREATED, Json(QuotaJson::from(&q))))
}

async fn modify_quota(
    State(st): State<AppState>,
    Path((kind, id)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<QuotaJson>> {
    let caller = st.caller(&headers);
    require_admin(&caller)?;
    let key = parse_key(&kind, &id)?;
    let patch = parse_body::<PatchBody>(&body)?.validate().map_err(ServiceError::from)?;
    Ok(Json(QuotaJson::from(&st.service().modify_quota(key, &patch, &caller)?)))
}

async fn delete_quota(
    State(st): State<AppState>,
    Path((kind, id)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<StatusCode> {
    let caller = st.caller(&headers);
    require_admin(&caller)?;
    let key = parse_key(&kind, &id)?;
    st.service().remove_quota(key, &caller)?;
    Ok(StatusCode::NO_CONTENT)
}

fn abs(path: &str) -> String {
    format!("/{}", path.trim_start_matches('/'))
}

async fn put_file(
    State(st): State<AppState>,
    Path(path): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<EntryJson>)> {
    let caller = st.caller(&headers);
    require_auth(&caller)?;
    let body: CreateFileBody = parse_body(&body)?;
    let path = abs(&path);
    let svc = st.service();
    let mut file = svc.create_entry(&path, body.uid, body.gid, body.retention_policy, body.access_latency, &caller)?;
    if let Some(size) = body.size {
        file = svc.commit_size(file.id, size)?;
    }
    Ok((StatusCode::CREATED, Json(EntryJson { path, entry: quota_core::Entry::File(file) })))
}

async fn get_file(State(st): State<AppState>, Path(path): Path<String>, headers: HeaderMap) -> ApiResult<Json<EntryJson>> {
    require_auth(&st.caller(&headers))?;
    let path = abs(&path);
    let entry = st.service().stat(&path)?;
    Ok(Json(EntryJson { path, entry }))
}

async fn delete_file(State(st): State<AppState>, Path(path): Path<String>, headers: HeaderMap) -> ApiResult<StatusCode> {
    let caller = st.caller(&headers);
    require_auth(&caller)?;
    st.service().remove_entry(&abs(&path), &caller)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn put_dir(
    State(st): State<AppState>,
    Path(path): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<EntryJson>)> {
    let caller = st.caller(&headers);
    require_auth(&caller)?;
    let body: CreateDirBody = parse_body(&body)?;
    let path = abs(&path);
    let spec = DirSpec {
        uid: body.uid,
        gid: body.gid,
        default_retention_policy: body.default_retention_policy,
        default_access_latency: body.default_access_latency,
    };
    let dir = st.service().create_directory(&path, spec, &caller)?;
    Ok((StatusCode::CREATED, Json(EntryJson { path, entry: quota_core::Entry::Directory(dir) })))
}

fn listing(st: &AppState, path: &str) -> ApiResult<Json<Vec<EntryJson>>> {
    let svc = st.service();
    let base = path.trim_end_matches('/');
    let entries = svc.list(path)?;
    Ok(Json(
        entries
            .into_iter()
            .map(|entry| EntryJson { path: format!("{base}/{}", entry.name()), entry })
            .collect(),
    ))
}

async fn list_dir(State(st): State<AppState>, Path(path): Path<String>, headers: HeaderMap) -> ApiResult<Json<Vec<EntryJson>>> {
    require_auth(&st.caller(&headers))?;
    listing(&st, &abs(&path))
}

async fn list_root(State(st): State<AppState>, headers: HeaderMap) -> ApiResult<Json<Vec<EntryJson>>> {
    require_auth(&st.caller(&headers))?;
    listing(&st, "/")
}

async fn scan(State(st): State<AppState>, headers: HeaderMap) -> ApiResult<Json<ScanReportJson>> {
    require_admin(&st.caller(&headers))?;
    let scanner = Arc::clone(&st.scanner);
    let report = tokio::task::spawn_blocking(move || scanner.run_scan_now())
        .await
        .map_err(|e| ApiError::Service(ServiceError::Store(StoreError::Io(std::io::Error::other(e)))))??;
    Ok(Json(ScanReportJson::from(&report)))
}

async fn fallback() -> ApiError {
    ApiError::NotFound("no such route".into())
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/quota/{kind}", get(list_quotas))
        .route("/quota/{kind}/{id}", get(get_quota).post(create_quota).patch(modify_quota).delete(delete_quota))
        .route("/ns/files/{*path}", put(put_file).get(get_file).delete(delete_file))
        .route("/ns/dirs", get(list_root))
        .route("/ns/dirs/{*path}", put(put_dir).get(list_dir))
        .route("/admin/scan", post(scan))
        .fallback(fallback);
    Router::new().nest(API_BASE, api).fallback(fallback).with_state(state)
}

/// A server running on its own thread and runtime, stopped on drop.
pub struct BackgroundServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    /// Binds `addr` (port 0 picks a free one) and serves `state` until dropped.
    pub fn start(state: AppState, addr: SocketAddr) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let listener = runtime.block_on(TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("quota-http".into()).spawn(move || {
            runtime.block_on(async move {
                let shutdown = async {
                    let _ = rx.await;
                };
                if let Err(e) = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await {
                    tracing::error!(error = %e, "http server stopped");
                }
            });
        })?;
        Ok(Self { addr, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL including the API prefix.
    pub fn url(&self) -> String {
        format!("http://{}{}", self.addr, API_BASE)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Runs the startup scan on an opened service and starts the schedule.
///
/// The service already enforces the persisted usage before this returns.
pub fn boot(service: QuotaService, schedule: quota_core::ScanSchedule) -> Result<Arc<Scanner>, ServiceError> {
    let scanner = Arc::new(Scanner::new(Arc::new(service)));
    let report = scanner.run_scan_now()?;
    tracing::info!(seq = report.scan_seq, entries = report.entries_scanned, "startup scan complete");
    scanner.start_schedule(schedule)?;
    Ok(scanner)
}

/// Opens the store, boots, and serves until Ctrl-C.
pub fn run_server(config: Config) -> anyhow::Result<()> {
    let service = match &config.data_dir {
        Some(dir) => QuotaService::open(dir, config.service_options())?,
        None => {
            tracing::warn!("no data-dir configured, state is kept in memory only");
            QuotaService::in_memory()
        }
    };
    let scanner = boot(service, config.scan)?;

    let state = AppState::new(Arc::clone(&scanner), config.tokens.clone());
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], config.port))).await?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    })?;
    scanner.stop_schedule();
    scanner.service().compact()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    fn app() -> Router {
        let mut tokens = HashMap::new();
        tokens.insert("adm".to_string(), AuthContext::admin("adm", 0, 0));
        router(AppState::new(Arc::new(Scanner::new(Arc::new(QuotaService::in_memory()))), tokens))
    }

    async fn call(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, serde_json::Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header(header::AUTHORIZATION, "Bearer adm")
            .body(Body::from(body.to_owned()))
            .unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null))
    }

    #[tokio::test]
    async fn bad_inputs_are_400() {
        let app = app();
        assert_eq!(call(&app, "POST", "/api/v1/quota/user/abc", "{}").await.0, StatusCode::BAD_REQUEST);
        assert_eq!(call(&app, "POST", "/api/v1/quota/user/1", "{oops").await.0, StatusCode::BAD_REQUEST);
        assert_eq!(call(&app, "POST", "/api/v1/quota/user/1", r#"{"custodialLimit":-5}"#).await.0, StatusCode::BAD_REQUEST);
        assert_eq!(call(&app, "GET", "/api/v1/quota/volume", "").await.0, StatusCode::NOT_FOUND);
        assert_eq!(call(&app, "GET", "/nowhere", "").await.0, StatusCode::NOT_FOUND);
    }

    #[tokio::test]
    async fn namespace_round_trip() {
        let app = app();
        let (s, v) = call(&app, "PUT", "/api/v1/ns/dirs/data", r#"{"uid":1,"gid":1,"defaultRetentionPolicy":"CUSTODIAL"}"#).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        let (s, v) = call(&app, "PUT", "/api/v1/ns/files/data/a", r#"{"uid":1,"gid":1,"size":9}"#).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        assert_eq!(v["path"], "/data/a");
        assert_eq!(v["sizeBytes"], 9);
        assert_eq!(v["retentionPolicy"], "CUSTODIAL");
        let (s, v) = call(&app, "GET", "/api/v1/ns/dirs/data", "").await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v[0]["path"], "/data/a");
        assert_eq!(call(&app, "DELETE", "/api/v1/ns/files/data", "").await.0, StatusCode::CONFLICT);
        assert_eq!(call(&app, "DELETE", "/api/v1/ns/files/data/a", "").await.0, StatusCode::NO_CONTENT);
        assert_eq!(call(&app, "GET", "/api/v1/ns/files/data/a", "").await.0, StatusCode::NOT_FOUND);
        let (s, v) = call(&app, "POST", "/api/v1/admin/scan", "").await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["entriesScanned"], 0);
    }
}
