//! Quality and popularity metadata for repositories and libraries.
//!
//! Providers are consulted in order and the first answer wins per field.
//! Provider failures never abort enrichment; they are logged and the affected
//! fields stay absent.

mod cache;
mod codehost;
mod fixture;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::OrgGraph;
use crate::model::{Coordinates, QualityMeta};

pub use cache::{MetaCache, MetaCacheEntry, CACHE_ENV};
pub use codehost::{
    code_host_provider, CodeHostProvider, HttpResponse, HttpTransport, RecordedTransport, ReqwestTransport,
    DEFAULT_TTL, TOKEN_ENV,
};
pub use fixture::{fixture_provider, write_fixture, FixtureProvider};

#[derive(Debug, Error)]
pub enum EnrichError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: malformed metadata file: {message}")]
    Malformed { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider {0} is disabled")]
    Disabled(String),
    #[error("rate limited by {0}")]
    RateLimited(String),
    #[error("network failure: {0}")]
    Network(String),
    #[error("unexpected HTTP status {0}")]
    Status(u16),
}

/// What a provider is asked about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetaKey {
    Repository { source_url: String },
    Library(Coordinates),
}

impl MetaKey {
    /// Lookup key text: the source URL, or `group:artifact:version`.
    pub fn text(&self) -> String {
        match self {
            MetaKey::Repository { source_url } => source_url.clone(),
            MetaKey::Library(coords) => coords.to_string(),
        }
    }
}

/// Read-only metadata source. May answer with a partially filled record.
pub trait MetaProvider: Send + Sync {
    fn id(&self) -> &str;
    fn lookup(&self, key: &MetaKey) -> Result<Option<QualityMeta>, ProviderError>;
}

fn resolve(providers: &[&dyn MetaProvider], key: &MetaKey, existing: Option<&QualityMeta>) -> Option<QualityMeta> {
    let mut meta = existing.cloned().unwrap_or_default();
    for p in providers {
        match p.lookup(key) {
            Ok(Some(answer)) => meta.fill_from(&answer),
            Ok(None) => {}
            Err(e) => tracing::warn!(provider = p.id(), key = %key.text(), "metadata lookup failed: {e}"),
        }
    }
    (!meta.is_empty()).then_some(meta)
}

/// Returns a copy of `g` with metadata filled in. Fields already present are
/// kept; topology, ids and names are never touched.
pub fn enrich_graph(g: &OrgGraph, providers: &[&dyn MetaProvider]) -> OrgGraph {
    if providers.is_empty() {
        return g.clone();
    }
    let repos: Vec<_> = g
        .repositories()
        .filter_map(|r| r.source_url.as_ref().map(|u| (r.id.clone(), MetaKey::Repository { source_url: u.clone() }, r.meta.as_ref())))
        .collect();
    let libs: Vec<_> = g.libraries().map(|l| (l.digest.clone(), MetaKey::Library(l.coordinates.clone()), l.meta.as_ref())).collect();

    let repo_meta: Vec<_> = repos.par_iter().map(|(id, key, existing)| (id, resolve(providers, key, *existing))).collect();
    let lib_meta: Vec<_> = libs.par_iter().map(|(id, key, existing)| (id, resolve(providers, key, *existing))).collect();

    let mut out = g.clone();
    for (id, meta) in repo_meta {
        out.repository_mut(id).expect("id taken from graph").meta = meta;
    }
    for (id, meta) in lib_meta {
        out.library_mut(id).expect("id taken from graph").meta = meta;
    }
    out
}
