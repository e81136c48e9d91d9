//! Scan-result ingestion: parsing, validation, canonical output and adapters
//! for external report formats.

mod steady;
mod vsif;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Coordinates, Digest, ModuleId, RepoId};

pub use steady::{adapt_external, STEADY_ADAPTER_ID};
pub use vsif::{
    canonical_json, canonicalize, parse_scan_file, AffectsDecl, ModuleDecl, Parsed, ScanDocument,
    FILE_EXTENSION, FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unsupported formatVersion {0:?}")]
    UnsupportedVersion(String),
    #[error("invalid {field}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("CVSS score {score} of {cve_id} outside [0.0, 10.0]")]
    ScoreOutOfRange { cve_id: String, score: f64 },
    #[error("malformed CVE id {0:?}")]
    MalformedCveId(String),
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("unresolved {kind} reference {id:?} ({referrer})")]
    DanglingReference { kind: &'static str, id: String, referrer: String },
    #[error("module parent chain of {0:?} is cyclic")]
    ModuleCycle(String),
    #[error("repository id {0} already loaded from another file")]
    DuplicateRepository(RepoId),
    #[error("module id {0} already loaded from another file")]
    DuplicateModule(ModuleId),
    #[error("library digest {digest} already loaded with coordinates {existing}, found {found}")]
    DigestConflict { digest: Digest, existing: Box<Coordinates>, found: Box<Coordinates> },
    #[error("unknown adapter {0:?}")]
    UnknownAdapter(String),
    #[error("adapter {adapter}: required field `{field}` missing")]
    MissingField { adapter: &'static str, field: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl IngestError {
    fn from_json(err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match err.classify() {
            Category::Syntax | Category::Eof => IngestError::Syntax {
                line: err.line(),
                column: err.column(),
                message: err.to_string(),
            },
            Category::Data | Category::Io => IngestError::Schema(err.to_string()),
        }
    }
}

/// Summary of a directory ingest.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestReport {
    pub files_read: usize,
    pub repositories_loaded: usize,
    pub warnings: Vec<FileMessage>,
    pub rejected: Vec<FileMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileMessage {
    pub file: PathBuf,
    pub message: String,
}

impl IngestReport {
    pub fn is_clean(&self) -> bool {
        self.rejected.is_empty()
    }
}

/// Parses every `.vulnex.json` file in `dir` (non-recursive).
///
/// Files are processed in lexicographic file-name order. A file that fails
/// validation, or that clashes with an already accepted file (repository id,
/// module id, or a digest with different coordinates), is rejected as a whole.
pub fn ingest_directory(dir: &Path) -> Result<(Vec<ScanDocument>, IngestReport), IngestError> {
    let io = |source| IngestError::Io { path: dir.to_path_buf(), source };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        let name = entry.file_name();
        let is_scan = name.to_str().is_some_and(|n| n.ends_with(FILE_EXTENSION));
        if is_scan && entry.path().is_file() {
            files.push(entry.path());
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let parsed: Vec<(PathBuf, Result<Parsed, IngestError>)> = files
        .into_par_iter()
        .map(|path| {
            let result = fs::read(&path)
                .map_err(|source| IngestError::Io { path: path.clone(), source })
                .and_then(|bytes| parse_scan_file(&bytes));
            (path, result)
        })
        .collect();

    let mut report = IngestReport { files_read: parsed.len(), ..Default::default() };
    let mut accepted = Vec::new();
    let mut repos = BTreeSet::new();
    let mut modules = BTreeSet::new();
    let mut digests: BTreeMap<Digest, Coordinates> = BTreeMap::new();

    for (path, result) in parsed {
        let parsed = match result {
            Ok(p) => p,
            Err(e) => {
                report.rejected.push(FileMessage { file: path, message: e.to_string() });
                continue;
            }
        };
        if let Err(e) = check_against_accepted(&parsed.document, &repos, &modules, &digests) {
            report.rejected.push(FileMessage { file: path, message: e.to_string() });
            continue;
        }
        let doc = parsed.document;
        repos.insert(doc.repository.id.clone());
        modules.extend(doc.modules.iter().map(|m| m.id.clone()));
        for lib in &doc.libraries {
            digests.entry(lib.digest.clone()).or_insert_with(|| lib.coordinates.clone());
        }
        report
            .warnings
            .extend(parsed.warnings.into_iter().map(|message| FileMessage { file: path.clone(), message }));
        accepted.push(doc);
    }
    report.repositories_loaded = accepted.len();
    Ok((accepted, report))
}

fn check_against_accepted(
    doc: &ScanDocument,
    repos: &BTreeSet<RepoId>,
    modules: &BTreeSet<ModuleId>,
    digests: &BTreeMap<Digest, Coordinates>,
) -> Result<(), IngestError> {
    if repos.contains(&doc.repository.id) {
        return Err(IngestError::DuplicateRepository(doc.repository.id.clone()));
    }
    if let Some(m) = doc.modules.iter().find(|m| modules.contains(&m.id)) {
        return Err(IngestError::DuplicateModule(m.id.clone()));
    }
    for lib in &doc.libraries {
        if let Some(existing) = digests.get(&lib.digest) {
            if *existing != lib.coordinates {
                return Err(IngestError::DigestConflict {
                    digest: lib.digest.clone(),
                    existing: Box::new(existing.clone()),
                    found: Box::new(lib.coordinates.clone()),
                });
            }
        }
    }
    Ok(())
}
