//! Remote knowledge bases over HTTP.
//!
//! [`RemoteClient`] is the async core: it fetches definitions and
//! fixpoints, caches responses for the server-advertised `max-age`,
//! revalidates stale entries with `If-None-Match` (a `304` refreshes the
//! entry without a body transfer), negative-caches `404`s, negotiates gzip,
//! reuses connections, and runs many requests concurrently. [`RemoteKb`]
//! wraps it in a blocking facade implementing
//! [`KnowledgeBase`](crate::model::KnowledgeBase) for synchronous callers
//! and for composition into chained KBs.

mod lru;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt, TryStreamExt};
use reqwest::header::{self, HeaderMap};
use reqwest::StatusCode;

use crate::engine::{self, FixpointDefinition, JoinStrategy};
use crate::model::{
    KbError, KbResult, KnowledgeBase, PropertyId, PropertyMap, PrototypeDefinition, PrototypeId,
};
use crate::wire;
use lru::LruCache;

/// Client behavior knobs.
#[derive(Debug, Clone)]
pub struct ClientConfig {
    /// Cached entries across definitions and fixpoints; 0 disables
    /// caching entirely (every lookup hits the network).
    pub cache_capacity: usize,
    /// Upper bound on in-flight requests for concurrent fetches.
    pub max_concurrency: usize,
    /// Advertise and decode gzip content encoding.
    pub accept_gzip: bool,
    /// Extra attempts for idempotent GETs after a transport failure.
    /// Batch POSTs are never retried.
    pub retries: u32,
    pub request_timeout: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            cache_capacity: 10_000,
            max_concurrency: 100,
            accept_gzip: true,
            retries: 2,
            request_timeout: Duration::from_secs(30),
        }
    }
}

/// Client-side failure.
#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// Connect/read failure after retries.
    #[error("transport failure: {0}")]
    Transport(String),
    /// The server answered, but not with the wire contract.
    #[error("protocol violation: {0}")]
    Protocol(String),
    /// Unexpected HTTP status.
    #[error("unexpected HTTP status {status}: {body}")]
    Http { status: u16, body: String },
    /// A batch referenced IDs the server does not define.
    #[error("batch missed {} prototype(s)", missing.len())]
    BatchMiss { missing: Vec<PrototypeId> },
    /// A fixpoint was requested for an undefined prototype.
    #[error("unknown prototype {0}")]
    UnknownPrototype(PrototypeId),
}

/// Outcome of a remote definition lookup.
#[derive(Debug, Clone)]
pub struct RemoteLookupResult {
    /// `None` when the server (or the negative cache) says undefined.
    pub definition: Option<Arc<PrototypeDefinition>>,
    /// Alternate provider URLs advertised through `Link; rel="alternate"`.
    pub alternates: Vec<String>,
    /// Whether the result came from the local cache without any network
    /// round trip.
    pub served_from_cache: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Endpoint {
    Definition,
    Fixpoint,
}

impl Endpoint {
    fn path(self) -> &'static str {
        match self {
            Endpoint::Definition => "/",
            Endpoint::Fixpoint => "/fixpoint",
        }
    }
}

struct CacheEntry {
    definition: Option<Arc<PrototypeDefinition>>,
    etag: Option<String>,
    fresh_until: Instant,
    alternates: Vec<String>,
}

/// Async HTTP client for one prototype provider. Cheap to clone; clones
/// share the connection pool and the response cache.
#[derive(Clone)]
pub struct RemoteClient {
    base_url: Arc<str>,
    http: reqwest::Client,
    cache: Arc<Mutex<LruCache<(Endpoint, PrototypeId), CacheEntry>>>,
    config: Arc<ClientConfig>,
}

impl RemoteClient {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        Self::with_config(base_url, ClientConfig::default())
    }

    pub fn with_config(base_url: &str, config: ClientConfig) -> Result<Self, ClientError> {
        let base_url = base_url.trim_end_matches('/');
        let http = reqwest::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self {
            base_url: Arc::from(base_url),
            http,
            cache: Arc::new(Mutex::new(LruCache::new(config.cache_capacity))),
            config: Arc::new(config),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Looks up a definition; absence is a value, not an error.
    pub async fn fetch_definition(
        &self,
        id: &PrototypeId,
    ) -> Result<RemoteLookupResult, ClientError> {
        self.fetch_entity(Endpoint::Definition, id).await
    }

    /// Fetches the fixpoint of `id`. Requesting the fixpoint of an
    /// undefined prototype is a caller bug and surfaces as an error.
    pub async fn fetch_fixpoint(
        &self,
        id: &PrototypeId,
    ) -> Result<FixpointDefinition, ClientError> {
        let result = self.fetch_entity(Endpoint::Fixpoint, id).await?;
        let def = result
            .definition
            .ok_or_else(|| ClientError::UnknownPrototype(id.clone()))?;
        fixpoint_from_definition(&def)
    }

    /// Retrieves many definitions in one request. Order-preserving; the
    /// server answers all-or-nothing, so one undefined ID fails the batch.
    /// Results land in the cache without validators (batches carry none).
    pub async fn fetch_batch(
        &self,
        ids: &[PrototypeId],
    ) -> Result<Vec<Arc<PrototypeDefinition>>, ClientError> {
        self.fetch_batch_at(Endpoint::Definition, ids)
            .await
            .map(|defs| defs.into_iter().map(|(_, def)| def).collect())
    }

    /// As [`fetch_batch`](Self::fetch_batch) for fixpoints.
    pub async fn fetch_fixpoint_batch(
        &self,
        ids: &[PrototypeId],
    ) -> Result<Vec<FixpointDefinition>, ClientError> {
        let defs = self.fetch_batch_at(Endpoint::Fixpoint, ids).await?;
        defs.iter()
            .map(|(_, def)| fixpoint_from_definition(def))
            .collect()
    }

    /// Fetches the fixpoints of `ids` with up to `concurrency` requests in
    /// flight, preserving input order in the output.
    pub async fn fetch_fixpoints_concurrent(
        &self,
        ids: &[PrototypeId],
        concurrency: usize,
    ) -> Result<Vec<FixpointDefinition>, ClientError> {
        let concurrency = concurrency.clamp(1, self.config.max_concurrency);
        stream::iter(ids.iter().map(|id| self.fetch_fixpoint(id)))
            .buffered(concurrency)
            .try_collect()
            .await
    }

    async fn fetch_entity(
        &self,
        endpoint: Endpoint,
        id: &PrototypeId,
    ) -> Result<RemoteLookupResult, ClientError> {
        let mut revalidation_tag: Option<String> = None;
        if self.config.cache_capacity > 0 {
            let mut cache = self.cache.lock().expect("cache lock");
            if let Some(entry) = cache.get(&(endpoint, id.clone())) {
                if entry.fresh_until > Instant::now() {
                    return Ok(RemoteLookupResult {
                        definition: entry.definition.clone(),
                        alternates: entry.alternates.clone(),
                        served_from_cache: true,
                    });
                }
                revalidation_tag = entry.etag.clone();
            }
        }

        let url = format!("{}{}", self.base_url, endpoint.path());
        let response = self
            .get_with_retries(&url, id, revalidation_tag.as_deref())
            .await?;
        let received = Instant::now();
        let status = response.status();
        let headers = response.headers().clone();
        let max_age = parse_max_age(&headers);
        let alternates = parse_alternate_links(&headers);

        match status {
            StatusCode::OK => {
                let body = self.read_body(response, &headers).await?;
                let def = Arc::new(
                    wire::decode_definition(&body)
                        .map_err(|e| ClientError::Protocol(format!("undecodable body: {e}")))?,
                );
                if def.id != *id {
                    return Err(ClientError::Protocol(format!(
                        "requested {id} but the body describes {}",
                        def.id
                    )));
                }
                self.store(
                    endpoint,
                    id,
                    CacheEntry {
                        definition: Some(def.clone()),
                        etag: etag_of(&headers),
                        fresh_until: received + max_age,
                        alternates: alternates.clone(),
                    },
                );
                Ok(RemoteLookupResult {
                    definition: Some(def),
                    alternates,
                    served_from_cache: false,
                })
            }
            StatusCode::NOT_MODIFIED => {
                // Only possible in reply to our conditional request; the
                // cached entry regains freshness.
                let mut cache = self.cache.lock().expect("cache lock");
                match cache.get_mut(&(endpoint, id.clone())) {
                    Some(entry) => {
                        entry.fresh_until = received + max_age;
                        Ok(RemoteLookupResult {
                            definition: entry.definition.clone(),
                            alternates: entry.alternates.clone(),
                            served_from_cache: true,
                        })
                    }
                    None => Err(ClientError::Protocol(
                        "304 Not Modified without a cached entry".into(),
                    )),
                }
            }
            StatusCode::NOT_FOUND => {
                // Negative result, cached for the same lifetime as a
                // positive one.
                self.store(
                    endpoint,
                    id,
                    CacheEntry {
                        definition: None,
                        etag: None,
                        fresh_until: received + max_age,
                        alternates: Vec::new(),
                    },
                );
                Ok(RemoteLookupResult {
                    definition: None,
                    alternates,
                    served_from_cache: false,
                })
            }
            status => {
                let body = String::from_utf8_lossy(
                    &response.bytes().await.unwrap_or_default(),
                )
                .into_owned();
                Err(ClientError::Http {
                    status: status.as_u16(),
                    body,
                })
            }
        }
    }

    async fn get_with_retries(
        &self,
        url: &str,
        id: &PrototypeId,
        if_none_match: Option<&str>,
    ) -> Result<reqwest::Response, ClientError> {
        let mut last_error = None;
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                tokio::time::sleep(backoff(attempt)).await;
            }
            let mut request = self.http.get(url).query(&[("p", id.as_str())]);
            if self.config.accept_gzip {
                request = request.header(header::ACCEPT_ENCODING, "gzip");
            }
            if let Some(tag) = if_none_match {
                request = request.header(header::IF_NONE_MATCH, tag);
            }
            match request.send().await {
                Ok(response) => return Ok(response),
                Err(err) => last_error = Some(err),
            }
        }
        Err(ClientError::Transport(
            last_error.expect("at least one attempt").to_string(),
        ))
    }

    async fn fetch_batch_at(
        &self,
        endpoint: Endpoint,
        ids: &[PrototypeId],
    ) -> Result<Vec<(PrototypeId, Arc<PrototypeDefinition>)>, ClientError> {
        let url = match endpoint {
            Endpoint::Definition => format!("{}/batch", self.base_url),
            Endpoint::Fixpoint => format!("{}/fixpoint/batch", self.base_url),
        };
        let mut request = self
            .http
            .post(&url)
            .header(header::CONTENT_TYPE, "application/json")
            .body(wire::encode_id_list(ids));
        if self.config.accept_gzip {
            request = request.header(header::ACCEPT_ENCODING, "gzip");
        }
        // One attempt: batch POSTs are not assumed idempotent server-side.
        let response = request
            .send()
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status();
        let headers = response.headers().clone();
        let received = Instant::now();

        if status == StatusCode::NOT_FOUND {
            let body = response.bytes().await.unwrap_or_default();
            return Err(parse_batch_miss(&body));
        }
        if status != StatusCode::OK {
            let body = String::from_utf8_lossy(&response.bytes().await.unwrap_or_default())
                .into_owned();
            return Err(ClientError::Http {
                status: status.as_u16(),
                body,
            });
        }

        let body = self.read_body(response, &headers).await?;
        let defs = wire::decode_batch(&body)
            .map_err(|e| ClientError::Protocol(format!("undecodable batch body: {e}")))?;
        if defs.len() != ids.len() {
            return Err(ClientError::Protocol(format!(
                "asked for {} prototypes, got {}",
                ids.len(),
                defs.len()
            )));
        }
        let max_age = parse_max_age(&headers);
        let mut out = Vec::with_capacity(defs.len());
        for (requested, def) in ids.iter().zip(defs) {
            if def.id != *requested {
                return Err(ClientError::Protocol(format!(
                    "batch order violated: expected {requested}, got {}",
                    def.id
                )));
            }
            let def = Arc::new(def);
            self.store(
                endpoint,
                requested,
                CacheEntry {
                    definition: Some(def.clone()),
                    etag: None,
                    fresh_until: received + max_age,
                    alternates: Vec::new(),
                },
            );
            out.push((requested.clone(), def));
        }
        Ok(out)
    }

    async fn read_body(
        &self,
        response: reqwest::Response,
        headers: &HeaderMap,
    ) -> Result<Vec<u8>, ClientError> {
        let raw = response
            .bytes()
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let gzipped = headers
            .get(header::CONTENT_ENCODING)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.eq_ignore_ascii_case("gzip"));
        if !gzipped {
            return Ok(raw.to_vec());
        }
        let mut decoder = flate2::read::GzDecoder::new(raw.as_ref());
        let mut body = Vec::new();
        std::io::Read::read_to_end(&mut decoder, &mut body)
            .map_err(|e| ClientError::Protocol(format!("bad gzip body: {e}")))?;
        Ok(body)
    }

    fn store(&self, endpoint: Endpoint, id: &PrototypeId, entry: CacheEntry) {
        if self.config.cache_capacity == 0 {
            return;
        }
        self.cache
            .lock()
            .expect("cache lock")
            .insert((endpoint, id.clone()), entry);
    }
}

fn fixpoint_from_definition(
    def: &PrototypeDefinition,
) -> Result<FixpointDefinition, ClientError> {
    if !def.base.is_empty_prototype() || !def.remove.is_empty() {
        return Err(ClientError::Protocol(format!(
            "fixpoint for {} is not in (PROTO:P_0, ADD, \u{2205}) form",
            def.id
        )));
    }
    let properties: PropertyMap = def
        .add
        .iter()
        .flat_map(|(p, vs)| vs.iter().map(move |v| (p.clone(), v.clone())))
        .collect();
    Ok(FixpointDefinition {
        id: def.id.clone(),
        properties,
    })
}

fn backoff(attempt: u32) -> Duration {
    // Linear backoff with cheap jitter from the clock's sub-millisecond
    // noise; precision matters less than not retrying in lockstep.
    let jitter = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.subsec_nanos() as u64 % 50)
        .unwrap_or(25);
    Duration::from_millis(50 * u64::from(attempt) + jitter)
}

fn etag_of(headers: &HeaderMap) -> Option<String> {
    headers
        .get(header::ETAG)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned)
}

fn parse_max_age(headers: &HeaderMap) -> Duration {
    headers
        .get(header::CACHE_CONTROL)
        .and_then(|v| v.to_str().ok())
        .and_then(|value| {
            value.split(',').find_map(|directive| {
                directive
                    .trim()
                    .strip_prefix("max-age=")
                    .and_then(|seconds| seconds.trim().parse::<u64>().ok())
            })
        })
        .map(Duration::from_secs)
        .unwrap_or(Duration::ZERO)
}

/// Extracts target URLs of `rel="alternate"` links.
fn parse_alternate_links(headers: &HeaderMap) -> Vec<String> {
    let mut out = Vec::new();
    for value in headers.get_all(header::LINK) {
        let Ok(value) = value.to_str() else { continue };
        let mut rest = value;
        while let Some(start) = rest.find('<') {
            let Some(end) = rest[start..].find('>') else {
                break;
            };
            let url = &rest[start + 1..start + end];
            let after = &rest[start + end + 1..];
            let next_link = after.find('<').unwrap_or(after.len());
            // This link's parameters stop at the list comma (quoted commas
            // in parameter values are not expected from peers we talk to).
            let params = after[..next_link].split(',').next().unwrap_or("");
            if is_alternate_rel(params) {
                out.push(url.to_owned());
            }
            rest = &after[next_link..];
        }
    }
    out
}

fn is_alternate_rel(params: &str) -> bool {
    params.split(';').any(|param| {
        let param = param.trim();
        param
            .strip_prefix("rel=")
            .map(|value| {
                value
                    .trim_matches('"')
                    .split_ascii_whitespace()
                    .any(|token| token.eq_ignore_ascii_case("alternate"))
            })
            .unwrap_or(false)
    })
}

fn parse_batch_miss(body: &[u8]) -> ClientError {
    #[derive(serde::Deserialize)]
    struct MissBody {
        missing: Vec<String>,
    }
    match serde_json::from_slice::<MissBody>(body) {
        Ok(parsed) => {
            let missing = parsed
                .missing
                .iter()
                .filter_map(|s| PrototypeId::new(s).ok())
                .collect();
            ClientError::BatchMiss { missing }
        }
        Err(_) => ClientError::BatchMiss { missing: Vec::new() },
    }
}

/// Blocking facade over [`RemoteClient`], usable as a [`KnowledgeBase`].
/// Owns a small runtime; do not call from inside another tokio runtime
/// (use the async client there).
pub struct RemoteKb {
    client: RemoteClient,
    runtime: tokio::runtime::Runtime,
}

impl RemoteKb {
    pub fn connect(base_url: &str) -> Result<Self, ClientError> {
        Self::with_config(base_url, ClientConfig::default())
    }

    pub fn with_config(base_url: &str, config: ClientConfig) -> Result<Self, ClientError> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self {
            client: RemoteClient::with_config(base_url, config)?,
            runtime,
        })
    }

    pub fn client(&self) -> &RemoteClient {
        &self.client
    }

    pub fn lookup(&self, id: &PrototypeId) -> Result<RemoteLookupResult, ClientError> {
        self.runtime.block_on(self.client.fetch_definition(id))
    }

    pub fn fixpoint(&self, id: &PrototypeId) -> Result<FixpointDefinition, ClientError> {
        self.runtime.block_on(self.client.fetch_fixpoint(id))
    }

    pub fn batch(&self, ids: &[PrototypeId]) -> Result<Vec<Arc<PrototypeDefinition>>, ClientError> {
        self.runtime.block_on(self.client.fetch_batch(ids))
    }
}

impl KnowledgeBase for RemoteKb {
    fn is_defined(&self, id: &PrototypeId) -> KbResult<Option<Arc<PrototypeDefinition>>> {
        self.lookup(id)
            .map(|result| result.definition)
            .map_err(KbError::new)
    }
}

/// Join policy for multi-provider resolution; the trust order is the
/// discovery order (primary first), so no source list is needed up front.
#[derive(Debug, Clone)]
pub enum JoinPolicy {
    UnionAll,
    PreferPrimary,
    ConstrainedCardinality(std::collections::BTreeMap<PropertyId, usize>),
}

/// Mints and reuses clients for alternate provider URLs.
pub struct ClientRegistry {
    config: ClientConfig,
    clients: Mutex<HashMap<String, RemoteClient>>,
}

impl ClientRegistry {
    pub fn new(config: ClientConfig) -> Self {
        Self {
            config,
            clients: Mutex::new(HashMap::new()),
        }
    }

    pub fn client_for(&self, base_url: &str) -> Result<RemoteClient, ClientError> {
        let mut clients = self.clients.lock().expect("registry lock");
        if let Some(existing) = clients.get(base_url) {
            return Ok(existing.clone());
        }
        let client = RemoteClient::with_config(base_url, self.config.clone())?;
        clients.insert(base_url.to_owned(), client.clone());
        Ok(client)
    }
}

/// A definition joined across the primary provider and its advertised
/// alternates.
#[derive(Debug, Clone)]
pub struct JoinedLookup {
    pub definition: PrototypeDefinition,
    /// Source URLs that contributed, most trusted (the primary) first.
    pub sources: Vec<String>,
    /// Alternates that failed, with the failure message; the join degraded
    /// to the remaining sources.
    pub degraded: Vec<(String, String)>,
}

/// Fetches `id` from the primary, follows each advertised alternate once
/// (no transitive chasing), and joins everything retrieved. Primary
/// failures propagate; alternate failures degrade the join.
pub async fn resolve_with_alternates(
    primary: &RemoteClient,
    registry: &ClientRegistry,
    id: &PrototypeId,
    policy: &JoinPolicy,
) -> Result<JoinedLookup, ClientError> {
    let first = primary.fetch_definition(id).await?;
    let primary_def = first
        .definition
        .ok_or_else(|| ClientError::UnknownPrototype(id.clone()))?;

    let mut sources: Vec<(engine::SourceTag, PrototypeDefinition)> =
        vec![(primary.base_url().to_owned(), (*primary_def).clone())];
    let mut degraded = Vec::new();

    for alternate in &first.alternates {
        let outcome = match registry.client_for(alternate) {
            Ok(client) => client.fetch_definition(id).await,
            Err(err) => Err(err),
        };
        match outcome {
            Ok(result) => {
                if let Some(def) = result.definition {
                    sources.push((alternate.clone(), (*def).clone()));
                }
            }
            Err(err) => degraded.push((alternate.clone(), err.to_string())),
        }
    }

    let order: Vec<String> = sources.iter().map(|(tag, _)| tag.clone()).collect();
    let strategy = match policy {
        JoinPolicy::UnionAll => JoinStrategy::UnionAll,
        JoinPolicy::PreferPrimary => JoinStrategy::PreferSource(order.clone()),
        JoinPolicy::ConstrainedCardinality(limits) => JoinStrategy::ConstrainedCardinality {
            max_cardinality: limits.clone(),
            trust_order: order.clone(),
        },
    };
    let definition = engine::join_definitions(&sources, &strategy)
        .map_err(|e| ClientError::Protocol(format!("join failed: {e}")))?;

    Ok(JoinedLookup {
        definition,
        sources: order,
        degraded,
    })
}
