use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::EnrichError;
use crate::ingest::canonical_json;
use crate::model::QualityMeta;

/// Environment variable naming the on-disk cache file.
pub const CACHE_ENV: &str = "VULNEX_META_CACHE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetaCacheEntry {
    pub meta: QualityMeta,
    pub fetched_at: DateTime<Utc>,
    pub ttl_seconds: u64,
}

impl MetaCacheEntry {
    pub fn is_fresh(&self, now: DateTime<Utc>) -> bool {
        let age = now.signed_duration_since(self.fetched_at);
        age.num_seconds() >= 0 && (age.num_seconds() as u64) < self.ttl_seconds
    }
}

/// Key → metadata cache, optionally persisted as canonical JSON.
#[derive(Debug, Default)]
pub struct MetaCache {
    path: Option<PathBuf>,
    entries: Mutex<BTreeMap<String, MetaCacheEntry>>,
}

impl MetaCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; later writes go back to it.
    pub fn open(path: &Path) -> Result<Self, EnrichError> {
        let shown = path.display().to_string();
        let entries = match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| EnrichError::Malformed { path: shown, message: e.to_string() })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(source) => return Err(EnrichError::Io { path: shown, source }),
        };
        Ok(Self { path: Some(path.to_path_buf()), entries: Mutex::new(entries) })
    }

    /// Cache at `$VULNEX_META_CACHE` when set, otherwise in memory.
    pub fn from_env() -> Result<Self, EnrichError> {
        match std::env::var_os(CACHE_ENV) {
            Some(p) => Self::open(Path::new(&p)),
            None => Ok(Self::in_memory()),
        }
    }

    pub fn get(&self, key: &str) -> Option<MetaCacheEntry> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn put(&self, key: &str, meta: QualityMeta, fetched_at: DateTime<Utc>, ttl: Duration) -> Result<(), EnrichError> {
        let mut entries = self.entries.lock().unwrap();
        entries.insert(key.to_owned(), MetaCacheEntry { meta, fetched_at, ttl_seconds: ttl.as_secs() });
        if let Some(path) = &self.path {
            fs::write(path, canonical_json(&*entries)).map_err(|source| EnrichError::Io { path: path.display().to_string(), source })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let now = DateTime::parse_from_rfc3339("2020-02-04T12:00:00Z").unwrap().with_timezone(&Utc);
        let cache = MetaCache::open(&path).unwrap();
        assert!(cache.is_empty());
        let meta = QualityMeta { github_stars: Some(5), ..Default::default() };
        cache.put("k", meta.clone(), now, Duration::from_secs(3600)).unwrap();
        let reloaded = MetaCache::open(&path).unwrap();
        let entry = reloaded.get("k").unwrap();
        assert_eq!(entry.meta, meta);
        assert!(entry.is_fresh(now + chrono::Duration::minutes(59)));
        assert!(!entry.is_fresh(now + chrono::Duration::minutes(61)));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"fetchedAt\": \"2020-02-04T12:00:00Z\""), "{text}");
    }
}
