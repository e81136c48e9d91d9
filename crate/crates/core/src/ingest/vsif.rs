//! Scan interchange format (`.vulnex.json`), version "1".
//!
//! Parsing goes through private wire structs so that range and reference
//! checks produce validation errors rather than opaque serde messages.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::{
    AffectsEdge, Coordinates, CveId, CvssScore, DependsEdge, Digest, Library, ModuleId,
    QualityMeta, RepoId, Repository, Vulnerability,
};

pub const FORMAT_VERSION: &str = "1";
pub const FILE_EXTENSION: &str = ".vulnex.json";

/// Module as declared inside a scan document; the owning repository is the
/// document's repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModuleDecl {
    pub id: ModuleId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<ModuleId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AffectsDecl {
    pub library_digest: Digest,
    pub cve_id: CveId,
    /// Reserved; carried through but not interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reachable: Option<bool>,
}

impl AffectsDecl {
    pub fn edge(&self) -> AffectsEdge {
        AffectsEdge { library_digest: self.library_digest.clone(), cve_id: self.cve_id.clone() }
    }
}

/// One repository's scan result. Entity lists are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanDocument {
    pub format_version: String,
    pub scan_timestamp: String,
    pub repository: Repository,
    pub modules: Vec<ModuleDecl>,
    pub libraries: Vec<Library>,
    pub vulnerabilities: Vec<Vulnerability>,
    pub dependencies: Vec<DependsEdge>,
    pub affects: Vec<AffectsDecl>,
}

/// A parsed document plus the non-fatal findings collected on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub document: ScanDocument,
    pub warnings: Vec<String>,
}

impl ScanDocument {
    /// Sorts every entity list by id and drops duplicate edges.
    pub fn normalize(&mut self) {
        self.modules.sort_by(|a, b| a.id.cmp(&b.id));
        self.libraries.sort_by(|a, b| a.digest.cmp(&b.digest));
        self.vulnerabilities.sort_by(|a, b| a.cve_id.cmp(&b.cve_id));
        self.dependencies.sort();
        self.dependencies.dedup();
        self.affects.sort();
        self.affects.dedup_by(|a, b| a.library_digest == b.library_digest && a.cve_id == b.cve_id);
    }

    /// Checks referential integrity, id uniqueness and field constraints.
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.format_version != FORMAT_VERSION {
            return Err(IngestError::UnsupportedVersion(self.format_version.clone()));
        }
        if chrono::DateTime::parse_from_rfc3339(&self.scan_timestamp).is_err() {
            return Err(IngestError::InvalidField {
                field: "scanTimestamp".into(),
                reason: format!("{:?} is not an ISO-8601 timestamp", self.scan_timestamp),
            });
        }
        non_empty("repository.id", self.repository.id.as_str())?;
        non_empty("repository.name", &self.repository.name)?;

        let mut modules = BTreeMap::new();
        for m in &self.modules {
            non_empty("modules[].id", m.id.as_str())?;
            non_empty("modules[].name", &m.name)?;
            if modules.insert(&m.id, m).is_some() {
                return Err(IngestError::DuplicateId { kind: "module", id: m.id.to_string() });
            }
        }
        for m in &self.modules {
            if let Some(parent) = &m.parent_id {
                if !modules.contains_key(parent) {
                    return Err(IngestError::DanglingReference {
                        kind: "module",
                        id: parent.to_string(),
                        referrer: format!("parent of module {}", m.id),
                    });
                }
            }
        }
        for m in &self.modules {
            // a chain longer than the module count must contain a cycle
            let mut cursor = m.parent_id.as_ref();
            let mut steps = 0;
            while let Some(p) = cursor {
                steps += 1;
                if steps > modules.len() {
                    return Err(IngestError::ModuleCycle(m.id.to_string()));
                }
                cursor = modules[p].parent_id.as_ref();
            }
        }

        let mut libraries = BTreeSet::new();
        for lib in &self.libraries {
            non_empty("libraries[].digest", lib.digest.as_str())?;
            non_empty("libraries[].coordinates.artifact", &lib.coordinates.artifact)?;
            non_empty("libraries[].coordinates.version", &lib.coordinates.version)?;
            if !libraries.insert(&lib.digest) {
                return Err(IngestError::DuplicateId { kind: "library", id: lib.digest.to_string() });
            }
        }

        let mut cves = BTreeSet::new();
        for v in &self.vulnerabilities {
            CveId::parse(v.cve_id.as_str())
                .map_err(|_| IngestError::MalformedCveId(v.cve_id.to_string()))?;
            if !cves.insert(&v.cve_id) {
                return Err(IngestError::DuplicateId { kind: "vulnerability", id: v.cve_id.to_string() });
            }
        }

        for d in &self.dependencies {
            if !modules.contains_key(&d.module_id) {
                return Err(IngestError::DanglingReference {
                    kind: "module",
                    id: d.module_id.to_string(),
                    referrer: format!("dependency on {}", d.library_digest),
                });
            }
            if !libraries.contains(&d.library_digest) {
                return Err(IngestError::DanglingReference {
                    kind: "library",
                    id: d.library_digest.to_string(),
                    referrer: format!("dependency of module {}", d.module_id),
                });
            }
        }
        for a in &self.affects {
            if !libraries.contains(&a.library_digest) {
                return Err(IngestError::DanglingReference {
                    kind: "library",
                    id: a.library_digest.to_string(),
                    referrer: format!("affects entry for {}", a.cve_id),
                });
            }
            if !cves.contains(&a.cve_id) {
                return Err(IngestError::DanglingReference {
                    kind: "vulnerability",
                    id: a.cve_id.to_string(),
                    referrer: format!("affects entry for library {}", a.library_digest),
                });
            }
        }
        Ok(())
    }
}

fn non_empty(field: &str, value: &str) -> Result<(), IngestError> {
    if value.trim().is_empty() {
        Err(IngestError::InvalidField { field: field.into(), reason: "must not be empty".into() })
    } else {
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireDocument {
    format_version: String,
    scan_timestamp: String,
    repository: WireRepository,
    #[serde(default)]
    modules: Vec<ModuleDecl>,
    #[serde(default)]
    libraries: Vec<WireLibrary>,
    #[serde(default)]
    vulnerabilities: Vec<WireVulnerability>,
    #[serde(default)]
    dependencies: Vec<DependsEdge>,
    #[serde(default)]
    affects: Vec<AffectsDecl>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireRepository {
    id: RepoId,
    name: String,
    #[serde(default)]
    source_url: Option<String>,
    #[serde(default)]
    meta: Option<WireMeta>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireLibrary {
    digest: Digest,
    coordinates: Coordinates,
    #[serde(default)]
    meta: Option<WireMeta>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireMeta {
    #[serde(default)]
    lgtm_grade: Option<String>,
    #[serde(default)]
    lgtm_score: Option<f64>,
    #[serde(default)]
    github_issues: Option<u64>,
    #[serde(default)]
    github_stars: Option<u64>,
    #[serde(default)]
    github_watchers: Option<u64>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireVulnerability {
    cve_id: String,
    #[serde(default)]
    cvss_score: Option<f64>,
    #[serde(default)]
    cvss_vector: Option<String>,
    #[serde(default)]
    description: Option<String>,
}

impl WireMeta {
    fn into_meta(self, owner: &str) -> Result<QualityMeta, IngestError> {
        let lgtm_grade = self
            .lgtm_grade
            .map(|g| crate::model::Grade::parse(&g))
            .transpose()
            .map_err(|e| IngestError::InvalidField { field: format!("{owner}.meta.lgtmGrade"), reason: e.to_string() })?;
        Ok(QualityMeta {
            lgtm_grade,
            lgtm_score: self.lgtm_score,
            github_issues: self.github_issues,
            github_stars: self.github_stars,
            github_watchers: self.github_watchers,
        })
    }
}

impl WireDocument {
    fn into_document(self) -> Result<ScanDocument, IngestError> {
        let repo_meta = self.repository.meta.map(|m| m.into_meta("repository")).transpose()?;
        let repository = Repository {
            id: self.repository.id,
            name: self.repository.name,
            source_url: self.repository.source_url,
            meta: repo_meta,
        };
        let libraries = self
            .libraries
            .into_iter()
            .map(|l| {
                let meta = l.meta.map(|m| m.into_meta(&format!("library {}", l.digest))).transpose()?;
                Ok(Library { digest: l.digest, coordinates: l.coordinates, meta })
            })
            .collect::<Result<Vec<_>, IngestError>>()?;
        let vulnerabilities = self
            .vulnerabilities
            .into_iter()
            .map(|v| {
                let cvss_score = match v.cvss_score {
                    Some(raw) => Some(CvssScore::from_f64(raw).map_err(|_| IngestError::ScoreOutOfRange {
                        cve_id: v.cve_id.clone(),
                        score: raw,
                    })?),
                    None => None,
                };
                Ok(Vulnerability {
                    cve_id: CveId::new(v.cve_id),
                    cvss_score,
                    cvss_vector: v.cvss_vector,
                    description: v.description,
                })
            })
            .collect::<Result<Vec<_>, IngestError>>()?;
        Ok(ScanDocument {
            format_version: self.format_version,
            scan_timestamp: self.scan_timestamp,
            repository,
            modules: self.modules,
            libraries,
            vulnerabilities,
            dependencies: self.dependencies,
            affects: self.affects,
        })
    }
}

/// Parses and validates one scan file. Unknown fields are reported as
/// warnings; the returned document is normalized.
pub fn parse_scan_file(bytes: &[u8]) -> Result<Parsed, IngestError> {
    let mut warnings = Vec::new();
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let wire: WireDocument = serde_ignored::deserialize(&mut de, |path| {
        warnings.push(format!("unknown field `{path}` ignored"));
    })
    .map_err(IngestError::from_json)?;
    de.end().map_err(IngestError::from_json)?;

    let mut document = wire.into_document()?;
    document.validate()?;
    document.normalize();
    Ok(Parsed { document, warnings })
}

/// Normalized serialization: sorted keys, sorted entity lists, one-decimal
/// scores, two-space indentation, trailing LF.
pub fn canonicalize(doc: &ScanDocument) -> Vec<u8> {
    let mut doc = doc.clone();
    doc.normalize();
    canonical_json(&doc)
}

/// Serializes through `serde_json::Value`, whose object map keeps keys sorted.
pub fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("domain types serialize to JSON");
    let mut out = serde_json::to_vec_pretty(&value).expect("JSON values serialize");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "formatVersion": "1",
        "scanTimestamp": "2020-01-21T10:00:00Z",
        "repository": {"id": "r1", "name": "low-marmoset"},
        "modules": [{"id": "m1", "name": "satisfactory-haddock"}],
        "libraries": [{"digest": "d1", "coordinates": {"group": "org.apache.activemq", "artifact": "activemq-all", "version": "5.15.0"}}],
        "vulnerabilities": [{"cveId": "CVE-2018-1270", "cvssScore": 9.8}],
        "dependencies": [{"moduleId": "m1", "libraryDigest": "d1"}],
        "affects": [{"libraryDigest": "d1", "cveId": "CVE-2018-1270"}]
    }"#;

    fn with(patch: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        patch(&mut v);
        serde_json::to_vec(&v).unwrap()
    }

    #[test]
    fn minimal_document_parses() {
        let parsed = parse_scan_file(MINIMAL.as_bytes()).unwrap();
        let d = &parsed.document;
        assert!(parsed.warnings.is_empty());
        assert_eq!(
            (d.modules.len(), d.libraries.len(), d.vulnerabilities.len(), d.dependencies.len(), d.affects.len()),
            (1, 1, 1, 1, 1)
        );
        assert_eq!(d.vulnerabilities[0].cvss_score, Some(CvssScore::from_tenths(98).unwrap()));
    }

    #[test]
    fn score_above_ten_is_rejected() {
        let bytes = with(|v| v["vulnerabilities"][0]["cvssScore"] = 11.0.into());
        match parse_scan_file(&bytes) {
            Err(IngestError::ScoreOutOfRange { cve_id, score }) => {
                assert_eq!(cve_id, "CVE-2018-1270");
                assert_eq!(score, 11.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_cve_is_named() {
        let bytes = with(|v| v["affects"][0]["cveId"] = "CVE-2099-0001".into());
        let err = parse_scan_file(&bytes).unwrap_err();
        match &err {
            IngestError::DanglingReference { kind, id, .. } => {
                assert_eq!(*kind, "vulnerability");
                assert_eq!(id, "CVE-2099-0001");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("CVE-2099-0001"));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_scan_file(b"{\n  \"formatVersion\": \"1\",\n  oops\n}").unwrap_err();
        match err {
            IngestError::Syntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_warn() {
        let bytes = with(|v| {
            v["producer"] = "steady-3.2".into();
            v["modules"][0]["language"] = "java".into();
        });
        let parsed = parse_scan_file(&bytes).unwrap();
        assert_eq!(parsed.warnings.len(), 2, "{:?}", parsed.warnings);
        assert!(parsed.warnings.iter().any(|w| w.contains("producer")));
        assert!(parsed.warnings.iter().any(|w| w.contains("language")));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let bytes = with(|v| {
            let m = v["modules"][0].clone();
            v["modules"].as_array_mut().unwrap().push(m);
        });
        assert!(matches!(
            parse_scan_file(&bytes),
            Err(IngestError::DuplicateId { kind: "module", .. })
        ));
        let bytes = with(|v| {
            let c = v["vulnerabilities"][0].clone();
            v["vulnerabilities"].as_array_mut().unwrap().push(c);
        });
        assert!(matches!(
            parse_scan_file(&bytes),
            Err(IngestError::DuplicateId { kind: "vulnerability", .. })
        ));
    }

    #[test]
    fn module_cycles_and_unknown_parents_are_rejected() {
        let bytes = with(|v| {
            v["modules"] = serde_json::json!([
                {"id": "a", "name": "a", "parentId": "b"},
                {"id": "b", "name": "b", "parentId": "a"}
            ]);
            v["dependencies"] = serde_json::json!([]);
        });
        assert!(matches!(parse_scan_file(&bytes), Err(IngestError::ModuleCycle(_))));
        let bytes = with(|v| v["modules"][0]["parentId"] = "ghost".into());
        assert!(matches!(
            parse_scan_file(&bytes),
            Err(IngestError::DanglingReference { kind: "module", .. })
        ));
    }

    #[test]
    fn wrong_version_and_bad_timestamp() {
        let bytes = with(|v| v["formatVersion"] = "2".into());
        assert!(matches!(parse_scan_file(&bytes), Err(IngestError::UnsupportedVersion(_))));
        let bytes = with(|v| v["scanTimestamp"] = "yesterday".into());
        assert!(matches!(parse_scan_file(&bytes), Err(IngestError::InvalidField { .. })));
    }

    #[test]
    fn missing_required_field_is_a_schema_error() {
        let bytes = with(|v| {
            v.as_object_mut().unwrap().remove("repository");
        });
        assert!(matches!(parse_scan_file(&bytes), Err(IngestError::Schema(_))));
    }

    #[test]
    fn canonical_form_is_idempotent() {
        let once = canonicalize(&parse_scan_file(MINIMAL.as_bytes()).unwrap().document);
        let twice = canonicalize(&parse_scan_file(&once).unwrap().document);
        assert_eq!(once, twice);
        let text = String::from_utf8(once).unwrap();
        assert!(text.ends_with("}\n"));
        assert!(text.contains("\"cvssScore\": 9.8"));
        assert!(!text.contains('\r'));
    }
}
