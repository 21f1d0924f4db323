//! HTTP serving of prototypes and fixpoints.
//!
//! `GET /?p=<encoded IRI>` returns the canonical JSON definition;
//! `GET /fixpoint?p=…` returns the fixpoint of the prototype. Both carry
//! `Cache-Control: max-age`, a strong `ETag` (SHA-256 of the canonical
//! body, so tags are stable across restarts), `Link; rel="alternate"`
//! headers for configured alternate providers, and gzip-compress when the
//! client advertises support. A matching `If-None-Match` yields `304`.
//!
//! `POST /batch` and `POST /fixpoint/batch` accept a JSON array of ID
//! strings and return the definitions (or fixpoints) in request order.
//! Batch responses carry no validators or alternate links; if any
//! requested ID is undefined the whole batch fails with `404` and a body
//! listing the missing IDs.
//!
//! Undefined IDs map to `404`, syntactic problems (missing or invalid `p`,
//! malformed batch payloads) to `400`.

use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use tokio::sync::oneshot;

use crate::engine::{compute_fixpoint, compute_interpretation_with, EngineError, FixpointCache};
use crate::model::{KnowledgeBase, PrototypeId};
use crate::wire;

/// Server settings. The backing KB is passed to [`serve`] separately.
#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Address to bind; port 0 picks a free port.
    pub bind: SocketAddr,
    /// Lifetime advertised through `Cache-Control: max-age`, in seconds.
    pub cache_max_age_seconds: u64,
    /// Alternate providers advertised per prototype through `Link`
    /// headers. URLs must be absolute.
    pub alternates: HashMap<PrototypeId, Vec<String>>,
    /// Materialize every fixpoint at startup instead of lazily on demand.
    pub precompute_fixpoints: bool,
    /// Artificial delay per request, for simulating slow links in
    /// benchmarks. Zero in production.
    pub handler_delay: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:0".parse().expect("valid address"),
            cache_max_age_seconds: 3_600,
            alternates: HashMap::new(),
            precompute_fixpoints: false,
            handler_delay: Duration::ZERO,
        }
    }
}

/// Server startup failure.
#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("failed to bind {0}")]
    Bind(#[from] std::io::Error),
    #[error("fixpoint precomputation failed: {0}")]
    Precompute(#[from] EngineError),
    #[error("alternate URL {url:?} for {id} is not absolute")]
    RelativeAlternate { id: PrototypeId, url: String },
}

/// Request statistics, observable by tests and operators.
#[derive(Debug, Default)]
pub struct RequestCounters {
    requests: AtomicU64,
    not_modified: AtomicU64,
}

impl RequestCounters {
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    /// How many requests were answered `304 Not Modified`.
    pub fn not_modified(&self) -> u64 {
        self.not_modified.load(Ordering::Relaxed)
    }
}

struct AppState {
    kb: Arc<dyn KnowledgeBase>,
    fixpoints: Arc<FixpointCache>,
    max_age: u64,
    alternates: HashMap<PrototypeId, Vec<String>>,
    delay: Duration,
    counters: Arc<RequestCounters>,
}

impl AppState {
    async fn induced_delay(&self) {
        if !self.delay.is_zero() {
            tokio::time::sleep(self.delay).await;
        }
    }
}

/// A running server; dropping the handle does not stop it, call
/// [`ServerHandle::shutdown`].
pub struct ServerHandle {
    addr: SocketAddr,
    counters: Arc<RequestCounters>,
    stop: oneshot::Sender<()>,
    task: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn counters(&self) -> Arc<RequestCounters> {
        self.counters.clone()
    }

    pub async fn shutdown(self) {
        let _ = self.stop.send(());
        let _ = self.task.await;
    }
}

/// Binds and starts serving `kb` on the ambient tokio runtime.
pub async fn serve(
    kb: Arc<dyn KnowledgeBase>,
    config: ServerConfig,
) -> Result<ServerHandle, ServerError> {
    for (id, urls) in &config.alternates {
        for url in urls {
            if crate::iri::validate_absolute_iri(url).is_err() {
                return Err(ServerError::RelativeAlternate {
                    id: id.clone(),
                    url: url.clone(),
                });
            }
        }
    }

    let fixpoints = Arc::new(FixpointCache::new());
    if config.precompute_fixpoints {
        compute_interpretation_with(&kb, &fixpoints)?;
    }

    let counters = Arc::new(RequestCounters::default());
    let state = Arc::new(AppState {
        kb,
        fixpoints,
        max_age: config.cache_max_age_seconds,
        alternates: config.alternates,
        delay: config.handler_delay,
        counters: counters.clone(),
    });

    let app = Router::new()
        .route("/", get(get_definition))
        .route("/fixpoint", get(get_fixpoint))
        .route("/batch", post(batch_definitions))
        .route("/fixpoint/batch", post(batch_fixpoints))
        .layer(axum::middleware::from_fn_with_state(
            state.clone(),
            count_requests,
        ))
        .with_state(state);

    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let shutdown = async {
            let _ = stopped.await;
        };
        if let Err(err) = axum::serve(listener, app)
            .with_graceful_shutdown(shutdown)
            .await
        {
            eprintln!("server error: {err}");
        }
    });

    Ok(ServerHandle {
        addr,
        counters,
        stop,
        task,
    })
}

/// A server running on its own runtime thread, for callers outside any
/// async context. Shuts down on drop.
pub struct DetachedServer {
    addr: SocketAddr,
    counters: Arc<RequestCounters>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl DetachedServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn counters(&self) -> Arc<RequestCounters> {
        self.counters.clone()
    }
}

impl Drop for DetachedServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

/// Starts a server on a dedicated background runtime and blocks until it
/// is accepting connections.
pub fn serve_detached(
    kb: Arc<dyn KnowledgeBase>,
    config: ServerConfig,
) -> Result<DetachedServer, ServerError> {
    let (ready_tx, ready_rx) = std::sync::mpsc::channel();
    let (stop_tx, stop_rx) = oneshot::channel::<()>();

    let thread = std::thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .expect("server runtime");
        runtime.block_on(async move {
            match serve(kb, config).await {
                Ok(handle) => {
                    let _ = ready_tx.send(Ok((handle.addr(), handle.counters())));
                    let _ = stop_rx.await;
                    handle.shutdown().await;
                }
                Err(err) => {
                    let _ = ready_tx.send(Err(err));
                }
            }
        });
    });

    let (addr, counters) = ready_rx.recv().expect("server thread alive")?;
    Ok(DetachedServer {
        addr,
        counters,
        stop: Some(stop_tx),
        thread: Some(thread),
    })
}

async fn count_requests(
    State(state): State<Arc<AppState>>,
    request: axum::extract::Request,
    next: axum::middleware::Next,
) -> Response {
    state.counters.requests.fetch_add(1, Ordering::Relaxed);
    let response = next.run(request).await;
    if response.status() == StatusCode::NOT_MODIFIED {
        state.counters.not_modified.fetch_add(1, Ordering::Relaxed);
    }
    response
}

#[derive(Deserialize)]
struct ProtoQuery {
    p: Option<String>,
}

async fn get_definition(
    State(state): State<Arc<AppState>>,
    Query(query): Query<ProtoQuery>,
    headers: HeaderMap,
) -> Response {
    state.induced_delay().await;
    let id = match parse_query_id(&query) {
        Ok(id) => id,
        Err(response) => return response,
    };
    match state.kb.is_defined(&id) {
        Ok(Some(def)) => {
            entity_response(&state, &headers, wire::encode_definition(&def), Some(&id))
        }
        Ok(None) => not_found(&state, &id),
        Err(err) => internal_error(err),
    }
}

async fn get_fixpoint(
    State(state): State<Arc<AppState>>,
    Query(query): Query<ProtoQuery>,
    headers: HeaderMap,
) -> Response {
    state.induced_delay().await;
    let id = match parse_query_id(&query) {
        Ok(id) => id,
        Err(response) => return response,
    };
    match compute_fixpoint(&state.kb, &id, &state.fixpoints) {
        Ok(fp) => entity_response(
            &state,
            &headers,
            wire::encode_fixpoint(&fp.id, &fp.properties),
            Some(&id),
        ),
        Err(EngineError::UnknownPrototype(_)) => not_found(&state, &id),
        Err(err) => internal_error(err),
    }
}

async fn batch_definitions(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> Response {
    state.induced_delay().await;
    let ids = match wire::decode_id_list(&body) {
        Ok(ids) => ids,
        Err(err) => return bad_request(format!("malformed batch request: {err}")),
    };

    let mut definitions = Vec::with_capacity(ids.len());
    let mut missing = Vec::new();
    for id in &ids {
        match state.kb.is_defined(id) {
            Ok(Some(def)) => definitions.push(def),
            Ok(None) => missing.push(id.clone()),
            Err(err) => return internal_error(err),
        }
    }
    if !missing.is_empty() {
        return batch_miss(missing);
    }
    let body = wire::encode_batch(definitions.iter().map(Arc::as_ref));
    plain_json_response(&state, &headers, body)
}

async fn batch_fixpoints(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> Response {
    state.induced_delay().await;
    let ids = match wire::decode_id_list(&body) {
        Ok(ids) => ids,
        Err(err) => return bad_request(format!("malformed batch request: {err}")),
    };

    let mut fixpoints = Vec::with_capacity(ids.len());
    let mut missing = Vec::new();
    for id in &ids {
        match compute_fixpoint(&state.kb, id, &state.fixpoints) {
            Ok(fp) => fixpoints.push(fp),
            Err(EngineError::UnknownPrototype(_)) => missing.push(id.clone()),
            Err(err) => return internal_error(err),
        }
    }
    if !missing.is_empty() {
        return batch_miss(missing);
    }
    let body = wire::encode_fixpoint_batch(fixpoints.iter().map(|fp| (&fp.id, &fp.properties)));
    plain_json_response(&state, &headers, body)
}

fn parse_query_id(query: &ProtoQuery) -> Result<PrototypeId, Response> {
    let Some(raw) = query.p.as_deref() else {
        return Err(bad_request("missing query parameter \"p\"".into()));
    };
    PrototypeId::new(raw).map_err(|err| bad_request(format!("invalid prototype ID: {err}")))
}

/// Strong entity tag: SHA-256 over the canonical body bytes. Equal bodies
/// get equal tags across restarts; no server-side state involved.
fn entity_tag(body: &[u8]) -> String {
    let digest = Sha256::digest(body);
    let mut tag = String::with_capacity(66);
    tag.push('"');
    for byte in digest {
        use std::fmt::Write;
        let _ = write!(tag, "{byte:02x}");
    }
    tag.push('"');
    tag
}

fn if_none_match_matches(headers: &HeaderMap, tag: &str) -> bool {
    headers
        .get_all(header::IF_NONE_MATCH)
        .iter()
        .filter_map(|value| value.to_str().ok())
        .flat_map(|value| value.split(','))
        .map(str::trim)
        .any(|candidate| candidate == tag || candidate == "*")
}

fn accepts_gzip(headers: &HeaderMap) -> bool {
    headers
        .get_all(header::ACCEPT_ENCODING)
        .iter()
        .filter_map(|value| value.to_str().ok())
        .flat_map(|value| value.split(','))
        .any(|token| {
            let mut parts = token.trim().split(';');
            let coding = parts.next().unwrap_or("").trim();
            if !coding.eq_ignore_ascii_case("gzip") {
                return false;
            }
            // Reject an explicit q=0.
            parts
                .find_map(|p| p.trim().strip_prefix("q=").map(str::to_owned))
                .map_or(true, |q| q.parse::<f32>().map_or(true, |q| q > 0.0))
        })
}

fn gzip(body: &[u8]) -> Vec<u8> {
    let mut encoder = flate2::write::GzEncoder::new(
        Vec::with_capacity(body.len() / 2 + 16),
        flate2::Compression::default(),
    );
    encoder.write_all(body).expect("in-memory gzip");
    encoder.finish().expect("in-memory gzip")
}

fn cache_control_value(state: &AppState) -> HeaderValue {
    HeaderValue::from_str(&format!("max-age={}", state.max_age)).expect("valid header")
}

/// Full single-entity response: validator, caching, compression, links.
fn entity_response(
    state: &AppState,
    request_headers: &HeaderMap,
    body: Vec<u8>,
    link_alternates_for: Option<&PrototypeId>,
) -> Response {
    let tag = entity_tag(&body);

    let mut response = if if_none_match_matches(request_headers, &tag) {
        let mut response = Response::new(Body::empty());
        *response.status_mut() = StatusCode::NOT_MODIFIED;
        response
    } else {
        let (payload, encoding) = if accepts_gzip(request_headers) {
            (gzip(&body), Some("gzip"))
        } else {
            (body, None)
        };
        let mut response = Response::new(Body::from(payload));
        let headers = response.headers_mut();
        headers.insert(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        );
        if let Some(encoding) = encoding {
            headers.insert(header::CONTENT_ENCODING, HeaderValue::from_static(encoding));
        }
        response
    };

    let headers = response.headers_mut();
    headers.insert(header::ETAG, HeaderValue::from_str(&tag).expect("hex tag"));
    headers.insert(header::CACHE_CONTROL, cache_control_value(state));
    if let Some(id) = link_alternates_for {
        if let Some(urls) = state.alternates.get(id) {
            for url in urls {
                if let Ok(value) = HeaderValue::from_str(&format!("<{url}>; rel=\"alternate\"")) {
                    headers.append(header::LINK, value);
                }
            }
        }
    }
    response
}

/// Batch response: compressed if negotiated, but no validators and no
/// alternate links.
fn plain_json_response(state: &AppState, request_headers: &HeaderMap, body: Vec<u8>) -> Response {
    let (payload, encoding) = if accepts_gzip(request_headers) {
        (gzip(&body), Some("gzip"))
    } else {
        (body, None)
    };
    let mut response = Response::new(Body::from(payload));
    let headers = response.headers_mut();
    headers.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/json"),
    );
    if let Some(encoding) = encoding {
        headers.insert(header::CONTENT_ENCODING, HeaderValue::from_static(encoding));
    }
    headers.insert(header::CACHE_CONTROL, cache_control_value(state));
    response
}

fn json_error(status: StatusCode, body: serde_json::Value) -> Response {
    let bytes = serde_json::to_vec(&body).expect("error body serializes");
    let mut response = (status, bytes).into_response();
    response.headers_mut().insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/json"),
    );
    response
}

fn bad_request(message: String) -> Response {
    json_error(
        StatusCode::BAD_REQUEST,
        serde_json::json!({ "error": message }),
    )
}

/// Undefined prototypes are cacheable misses: the `Cache-Control` lifetime
/// lets clients negative-cache instead of re-asking in a loop.
fn not_found(state: &AppState, id: &PrototypeId) -> Response {
    let mut response = json_error(
        StatusCode::NOT_FOUND,
        serde_json::json!({ "error": "undefined prototype", "id": id.as_str() }),
    );
    response
        .headers_mut()
        .insert(header::CACHE_CONTROL, cache_control_value(state));
    response
}

fn batch_miss(missing: Vec<PrototypeId>) -> Response {
    json_error(
        StatusCode::NOT_FOUND,
        serde_json::json!({
            "error": "undefined prototypes in batch",
            "missing": missing.iter().map(PrototypeId::as_str).collect::<Vec<_>>(),
        }),
    )
}

fn internal_error(err: impl std::fmt::Display) -> Response {
    json_error(
        StatusCode::INTERNAL_SERVER_ERROR,
        serde_json::json!({ "error": err.to_string() }),
    )
}
