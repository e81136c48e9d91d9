use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::{EnrichError, MetaCache, MetaKey, MetaProvider, ProviderError};
use crate::model::QualityMeta;

/// Environment variable holding the code-host API token.
pub const TOKEN_ENV: &str = "VULNEX_CODEHOST_TOKEN";
pub const DEFAULT_TTL: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    /// Lower-case header names.
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default, deserialize_with = "body_from_json")]
    pub body: Vec<u8>,
}

fn body_from_json<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
    let v = serde_json::Value::deserialize(d)?;
    Ok(match v {
        serde_json::Value::String(s) => s.into_bytes(),
        other => serde_json::to_vec(&other).expect("value serializes"),
    })
}

pub trait HttpTransport: Send + Sync {
    fn get(&self, url: &str, headers: &[(&str, String)]) -> Result<HttpResponse, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(20))
            .user_agent(concat!("vulnex/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("TLS backend initializes");
        Self { client }
    }
}

impl Default for ReqwestTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl HttpTransport for ReqwestTransport {
    fn get(&self, url: &str, headers: &[(&str, String)]) -> Result<HttpResponse, String> {
        let mut req = self.client.get(url);
        for (k, v) in headers {
            req = req.header(*k, v);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| v.to_str().ok().map(|v| (k.as_str().to_ascii_lowercase(), v.to_owned())))
            .collect();
        let body = resp.bytes().map_err(|e| e.to_string())?.to_vec();
        Ok(HttpResponse { status, headers, body })
    }
}

/// Replays responses recorded in a JSON file mapping URL → `{status, headers, body}`.
/// URLs without a recording answer 404. `set_offline` simulates a network outage.
#[derive(Debug, Default)]
pub struct RecordedTransport {
    responses: Mutex<BTreeMap<String, HttpResponse>>,
    offline: AtomicBool,
    calls: AtomicUsize,
}

impl RecordedTransport {
    pub fn new(responses: BTreeMap<String, HttpResponse>) -> Self {
        Self { responses: Mutex::new(responses), ..Default::default() }
    }

    pub fn load(path: &Path) -> Result<Self, EnrichError> {
        let shown = path.display().to_string();
        let bytes = std::fs::read(path).map_err(|source| EnrichError::Io { path: shown.clone(), source })?;
        let responses = serde_json::from_slice(&bytes).map_err(|e| EnrichError::Malformed { path: shown, message: e.to_string() })?;
        Ok(Self::new(responses))
    }

    pub fn set_response(&self, url: &str, response: HttpResponse) {
        self.responses.lock().unwrap().insert(url.to_owned(), response);
    }

    pub fn set_offline(&self, offline: bool) {
        self.offline.store(offline, Ordering::SeqCst);
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl HttpTransport for RecordedTransport {
    fn get(&self, url: &str, _headers: &[(&str, String)]) -> Result<HttpResponse, String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.offline.load(Ordering::SeqCst) {
            return Err("network unreachable".into());
        }
        Ok(self
            .responses
            .lock()
            .unwrap()
            .get(url)
            .cloned()
            .unwrap_or(HttpResponse { status: 404, headers: BTreeMap::new(), body: br#"{"message":"Not Found"}"#.to_vec() }))
    }
}

type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Issue, star and watcher counts from a GitHub-compatible REST API.
pub struct CodeHostProvider<T: HttpTransport> {
    id: String,
    endpoint: String,
    token: Option<String>,
    transport: T,
    cache: MetaCache,
    ttl: Duration,
    clock: Clock,
    disabled: AtomicBool,
}

pub fn code_host_provider(endpoint: &str, token: Option<String>) -> Result<CodeHostProvider<ReqwestTransport>, EnrichError> {
    let token = token.or_else(|| std::env::var(TOKEN_ENV).ok()).filter(|t| !t.is_empty());
    Ok(CodeHostProvider::new(endpoint, token, ReqwestTransport::new(), MetaCache::from_env()?))
}

#[derive(Deserialize)]
struct RepoPayload {
    open_issues_count: Option<u64>,
    stargazers_count: Option<u64>,
    subscribers_count: Option<u64>,
}

/// `https://host/owner/repo(.git)` → `(owner, repo)`.
fn owner_and_repo(url: &str) -> Option<(String, String)> {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let mut parts = rest.trim_end_matches('/').split('/').skip(1);
    let owner = parts.next().filter(|s| !s.is_empty())?;
    let repo = parts.next().map(|r| r.trim_end_matches(".git")).filter(|s| !s.is_empty())?;
    Some((owner.to_owned(), repo.to_owned()))
}

impl<T: HttpTransport> CodeHostProvider<T> {
    pub fn new(endpoint: &str, token: Option<String>, transport: T, cache: MetaCache) -> Self {
        Self {
            id: format!("codehost:{endpoint}"),
            endpoint: endpoint.trim_end_matches('/').to_owned(),
            token,
            transport,
            cache,
            ttl: DEFAULT_TTL,
            clock: Arc::new(Utc::now),
            disabled: AtomicBool::new(false),
        }
    }

    pub fn with_ttl(mut self, ttl: Duration) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn is_disabled(&self) -> bool {
        self.disabled.load(Ordering::SeqCst)
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn cache(&self) -> &MetaCache {
        &self.cache
    }

    fn fetch(&self, owner: &str, repo: &str) -> Result<Option<QualityMeta>, ProviderError> {
        let url = format!("{}/repos/{owner}/{repo}", self.endpoint);
        let mut headers = vec![("accept", "application/vnd.github+json".to_owned())];
        if let Some(t) = &self.token {
            headers.push(("authorization", format!("Bearer {t}")));
        }
        let resp = self.transport.get(&url, &headers).map_err(ProviderError::Network)?;
        let rate_limited = resp.status == 429
            || (resp.status == 403 && resp.headers.get("x-ratelimit-remaining").is_some_and(|v| v.trim() == "0"));
        match resp.status {
            200 => match serde_json::from_slice::<RepoPayload>(&resp.body) {
                Ok(p) => Ok(Some(QualityMeta {
                    github_issues: p.open_issues_count,
                    github_stars: p.stargazers_count,
                    github_watchers: p.subscribers_count,
                    ..Default::default()
                })),
                Err(e) => {
                    tracing::warn!(%url, "malformed code-host response: {e}");
                    Ok(None)
                }
            },
            404 => Ok(None),
            _ if rate_limited => Err(ProviderError::RateLimited(self.id.clone())),
            401 => {
                tracing::warn!(provider = %self.id, "credential rejected; disabling provider");
                self.disabled.store(true, Ordering::SeqCst);
                Err(ProviderError::Disabled(self.id.clone()))
            }
            s => Err(ProviderError::Status(s)),
        }
    }
}

impl<T: HttpTransport> MetaProvider for CodeHostProvider<T> {
    fn id(&self) -> &str {
        &self.id
    }

    fn lookup(&self, key: &MetaKey) -> Result<Option<QualityMeta>, ProviderError> {
        let MetaKey::Repository { source_url } = key else {
            return Ok(None);
        };
        let Some((owner, repo)) = owner_and_repo(source_url) else {
            return Ok(None);
        };
        let now = (self.clock)();
        let cached = self.cache.get(source_url);
        if let Some(entry) = cached.as_ref().filter(|e| e.is_fresh(now)) {
            return Ok(Some(entry.meta.clone()));
        }
        if self.is_disabled() {
            return match cached {
                Some(entry) => Ok(Some(entry.meta)),
                None => Err(ProviderError::Disabled(self.id.clone())),
            };
        }
        match self.fetch(&owner, &repo) {
            Ok(Some(meta)) => {
                if let Err(e) = self.cache.put(source_url, meta.clone(), now, self.ttl) {
                    tracing::warn!("could not persist metadata cache: {e}");
                }
                Ok(Some(meta))
            }
            Ok(None) => Ok(None),
            Err(e) => match cached {
                Some(entry) => {
                    tracing::warn!(key = %source_url, "serving stale metadata: {e}");
                    Ok(Some(entry.meta))
                }
                None => Err(e),
            },
        }
    }
}
