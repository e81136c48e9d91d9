//! Adapter for a minimal Steady-style JSON export.
//!
//! Recognized subset:
//!
//! ```json
//! {
//!   "application": {"group": "...", "artifact": "...", "version": "..."},
//!   "generatedAt": "2020-01-21T10:00:00Z",
//!   "sourceUrl": "https://github.com/org/repo",
//!   "dependencies": [{
//!     "digest": "...",
//!     "lib": {"group": "...", "artifact": "...", "version": "..."},
//!     "vulnerabilities": [{"bugId": "CVE-...", "cvssScore": 9.8, "cvssVector": "..."}]
//!   }]
//! }
//! ```
//!
//! The application becomes a repository (`group:artifact`) with a single
//! module (`group:artifact:version`) that depends on every listed library.

use std::collections::BTreeMap;

use serde_json::Value;

use super::vsif::{AffectsDecl, ModuleDecl, ScanDocument, FORMAT_VERSION};
use super::IngestError;
use crate::model::{
    Coordinates, CveId, CvssScore, DependsEdge, Digest, Library, ModuleId, RepoId, Repository,
    Vulnerability,
};

pub const STEADY_ADAPTER_ID: &str = "steady-json";

/// Maps an external report into a scan document through the adapter `format`.
pub fn adapt_external(format: &str, bytes: &[u8]) -> Result<ScanDocument, IngestError> {
    match format {
        STEADY_ADAPTER_ID => adapt_steady(bytes),
        other => Err(IngestError::UnknownAdapter(other.to_owned())),
    }
}

fn missing(field: impl Into<String>) -> IngestError {
    IngestError::MissingField { adapter: STEADY_ADAPTER_ID, field: field.into() }
}

fn str_field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a str, IngestError> {
    v.get(key).and_then(Value::as_str).ok_or_else(|| missing(format!("{path}{key}")))
}

fn coordinates(obj: Option<&Value>, path: &str) -> Result<Coordinates, IngestError> {
    let obj = obj.ok_or_else(|| missing(path))?;
    let prefix = format!("{path}.");
    Ok(Coordinates {
        group: obj.get("group").and_then(Value::as_str).unwrap_or_default().to_owned(),
        artifact: str_field(obj, "artifact", &prefix)?.to_owned(),
        version: str_field(obj, "version", &prefix)?.to_owned(),
    })
}

fn adapt_steady(bytes: &[u8]) -> Result<ScanDocument, IngestError> {
    let root: Value = serde_json::from_slice(bytes).map_err(IngestError::from_json)?;
    let app = coordinates(root.get("application"), "application")?;
    let generated_at = str_field(&root, "generatedAt", "")?;

    let repo_key = if app.group.is_empty() { app.artifact.clone() } else { format!("{}:{}", app.group, app.artifact) };
    let module_id = ModuleId::new(format!("{repo_key}:{}", app.version));
    let repository = Repository {
        id: RepoId::new(repo_key),
        name: app.artifact.clone(),
        source_url: root.get("sourceUrl").and_then(Value::as_str).map(str::to_owned),
        meta: None,
    };

    let deps = root
        .get("dependencies")
        .and_then(Value::as_array)
        .ok_or_else(|| missing("dependencies"))?;

    let mut libraries = BTreeMap::new();
    let mut vulnerabilities: BTreeMap<CveId, Vulnerability> = BTreeMap::new();
    let mut dependencies = Vec::new();
    let mut affects = Vec::new();

    for (i, dep) in deps.iter().enumerate() {
        let path = format!("dependencies[{i}]");
        let digest = Digest::new(str_field(dep, "digest", &format!("{path}."))?);
        let coords = coordinates(dep.get("lib"), &format!("{path}.lib"))?;
        libraries
            .entry(digest.clone())
            .or_insert_with(|| Library { digest: digest.clone(), coordinates: coords, meta: None });
        dependencies.push(DependsEdge { module_id: module_id.clone(), library_digest: digest.clone() });

        let vulns = dep.get("vulnerabilities").and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[]);
        for (j, bug) in vulns.iter().enumerate() {
            let bug_path = format!("{path}.vulnerabilities[{j}].");
            let raw_id = str_field(bug, "bugId", &bug_path)?;
            let cve_id = CveId::parse(raw_id).map_err(|_| IngestError::MalformedCveId(raw_id.to_owned()))?;
            let cvss_score = match bug.get("cvssScore").and_then(Value::as_f64) {
                Some(raw) => Some(CvssScore::from_f64(raw).map_err(|_| IngestError::ScoreOutOfRange {
                    cve_id: raw_id.to_owned(),
                    score: raw,
                })?),
                None => None,
            };
            vulnerabilities.entry(cve_id.clone()).or_insert_with(|| Vulnerability {
                cve_id: cve_id.clone(),
                cvss_score,
                cvss_vector: bug.get("cvssVector").and_then(Value::as_str).map(str::to_owned),
                description: None,
            });
            affects.push(AffectsDecl { library_digest: digest.clone(), cve_id, reachable: None });
        }
    }

    let mut doc = ScanDocument {
        format_version: FORMAT_VERSION.to_owned(),
        scan_timestamp: generated_at.to_owned(),
        repository,
        modules: vec![ModuleDecl { id: module_id, name: app.artifact, parent_id: None }],
        libraries: libraries.into_values().collect(),
        vulnerabilities: vulnerabilities.into_values().collect(),
        dependencies,
        affects,
    };
    doc.normalize();
    doc.validate()?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_adapter() {
        assert!(matches!(adapt_external("snyk", b"{}"), Err(IngestError::UnknownAdapter(id)) if id == "snyk"));
    }

    #[test]
    fn missing_application_version_is_named() {
        let bytes = br#"{"application": {"group": "g", "artifact": "a"}, "generatedAt": "2020-01-21T00:00:00Z", "dependencies": []}"#;
        let err = adapt_external(STEADY_ADAPTER_ID, bytes).unwrap_err();
        assert!(matches!(&err, IngestError::MissingField { field, .. } if field == "application.version"), "{err}");
    }
}
