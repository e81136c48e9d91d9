//! Graph snapshots: a canonical bundle of per-repository scan documents.
//! Indexes are rebuilt on load.

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, project_tree, GraphError, OrgGraph, RowTree, TreeOrdering};
use crate::ingest::{canonical_json, parse_scan_file, IngestError, FORMAT_VERSION};

pub const SNAPSHOT_KIND: &str = "vulnex-snapshot";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a snapshot: {0}")]
    Format(String),
    #[error("document {index}: {source}")]
    Document { index: usize, source: IngestError },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Bundle {
    format_version: String,
    kind: String,
    documents: Vec<serde_json::Value>,
}

/// Canonical snapshot bytes for `g`.
pub fn snapshot_bytes(g: &OrgGraph) -> Vec<u8> {
    let documents = g
        .to_documents()
        .iter()
        .map(|d| serde_json::to_value(d).expect("documents serialize"))
        .collect();
    canonical_json(&Bundle { format_version: FORMAT_VERSION.to_owned(), kind: SNAPSHOT_KIND.to_owned(), documents })
}

pub fn parse_snapshot(bytes: &[u8]) -> Result<OrgGraph, SnapshotError> {
    let bundle: Bundle = serde_json::from_slice(bytes).map_err(|e| SnapshotError::Format(e.to_string()))?;
    if bundle.kind != SNAPSHOT_KIND {
        return Err(SnapshotError::Format(format!("kind {:?}", bundle.kind)));
    }
    if bundle.format_version != FORMAT_VERSION {
        return Err(SnapshotError::Format(format!("formatVersion {:?}", bundle.format_version)));
    }
    let docs = bundle
        .documents
        .iter()
        .enumerate()
        .map(|(index, v)| {
            let bytes = serde_json::to_vec(v).expect("value serializes");
            parse_scan_file(&bytes).map(|p| p.document).map_err(|source| SnapshotError::Document { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(build_graph(&docs)?)
}

pub fn save_snapshot(g: &OrgGraph, path: &Path) -> Result<(), SnapshotError> {
    fs::write(path, snapshot_bytes(g)).map_err(|source| SnapshotError::Io { path: path.display().to_string(), source })
}

pub fn load_snapshot(path: &Path) -> Result<OrgGraph, SnapshotError> {
    let bytes = fs::read(path).map_err(|source| SnapshotError::Io { path: path.display().to_string(), source })?;
    parse_snapshot(&bytes)
}

/// A frozen graph plus lazily projected row trees, shared by concurrent readers.
#[derive(Debug)]
pub struct Snapshot {
    graph: OrgGraph,
    trees: [OnceLock<RowTree>; 3],
}

impl Snapshot {
    pub fn new(graph: OrgGraph) -> Self {
        Self { graph, trees: Default::default() }
    }

    pub fn graph(&self) -> &OrgGraph {
        &self.graph
    }

    pub fn tree(&self, ordering: TreeOrdering) -> &RowTree {
        let slot = match ordering {
            TreeOrdering::RepositoryCentered => 0,
            TreeOrdering::LibraryCentered => 1,
            TreeOrdering::BugCentered => 2,
        };
        self.trees[slot].get_or_init(|| project_tree(&self.graph, ordering))
    }
}
