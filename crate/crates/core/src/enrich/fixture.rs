use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{EnrichError, MetaKey, MetaProvider, ProviderError};
use crate::ingest::canonical_json;
use crate::model::QualityMeta;

/// Provider answering from a JSON object that maps lookup keys (source URL or
/// `group:artifact:version`) to metadata records.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureProvider {
    id: String,
    entries: BTreeMap<String, QualityMeta>,
}

impl FixtureProvider {
    pub fn new(id: impl Into<String>, entries: BTreeMap<String, QualityMeta>) -> Self {
        Self { id: id.into(), entries }
    }

    pub fn entries(&self) -> &BTreeMap<String, QualityMeta> {
        &self.entries
    }
}

impl MetaProvider for FixtureProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn lookup(&self, key: &MetaKey) -> Result<Option<QualityMeta>, ProviderError> {
        Ok(self.entries.get(&key.text()).cloned())
    }
}

pub fn fixture_provider(path: &Path) -> Result<FixtureProvider, EnrichError> {
    let shown = path.display().to_string();
    let bytes = fs::read(path).map_err(|source| EnrichError::Io { path: shown.clone(), source })?;
    let entries: BTreeMap<String, QualityMeta> =
        serde_json::from_slice(&bytes).map_err(|e| EnrichError::Malformed { path: shown.clone(), message: e.to_string() })?;
    Ok(FixtureProvider::new(format!("fixture:{shown}"), entries))
}

/// Writes entries in the canonical form `fixture_provider` reads.
pub fn write_fixture(path: &Path, entries: &BTreeMap<String, QualityMeta>) -> Result<(), EnrichError> {
    fs::write(path, canonical_json(entries)).map_err(|source| EnrichError::Io { path: path.display().to_string(), source })
}
