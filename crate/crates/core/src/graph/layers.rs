//! Three-layer dependency graph of a single repository.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{GraphError, OrgGraph};
use crate::model::{CveId, Digest, EntityRef, RepoId, Severity};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LayerNode {
    pub entity: EntityRef,
    pub name: String,
    /// Parent module, for nested modules in the middle layer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<EntityRef>,
    /// Present on bug nodes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
}

/// Repository on top, its modules and their libraries in the middle, the
/// libraries' CVEs at the bottom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LayeredGraph {
    pub top: Vec<LayerNode>,
    pub middle: Vec<LayerNode>,
    pub bottom: Vec<LayerNode>,
    /// repository→module, module→library and library→CVE edges, sorted.
    pub edges: Vec<(EntityRef, EntityRef)>,
}

pub fn dependency_graph_view(g: &OrgGraph, repo: &RepoId) -> Result<LayeredGraph, GraphError> {
    let repository = g
        .repository(repo.as_str())
        .ok_or_else(|| GraphError::UnknownEntity(EntityRef::Repository(repo.clone())))?;
    let repo_ref = EntityRef::Repository(repo.clone());

    let mut middle = Vec::new();
    let mut edges = BTreeSet::new();
    let mut libraries: BTreeSet<&Digest> = BTreeSet::new();

    for module_id in g.repository_modules(repo) {
        let module = g.module(module_id.as_str()).expect("indexed module exists");
        let module_ref = EntityRef::Module(module_id.clone());
        middle.push(LayerNode {
            entity: module_ref.clone(),
            name: module.name.clone(),
            parent: module.parent_module_id.clone().map(EntityRef::Module),
            severity: None,
        });
        edges.insert((repo_ref.clone(), module_ref.clone()));
        for lib in g.module_libraries(module_id) {
            libraries.insert(lib);
            edges.insert((module_ref.clone(), EntityRef::Library(lib.clone())));
        }
    }

    let mut cves: BTreeSet<&CveId> = BTreeSet::new();
    for lib in &libraries {
        let lib_ref = EntityRef::Library((*lib).clone());
        middle.push(LayerNode {
            name: g.display_name(&lib_ref).unwrap_or_default(),
            entity: lib_ref.clone(),
            parent: None,
            severity: None,
        });
        for cve in g.library_cves(lib) {
            cves.insert(cve);
            edges.insert((lib_ref.clone(), EntityRef::Vulnerability(cve.clone())));
        }
    }

    let bottom = cves
        .into_iter()
        .map(|c| LayerNode {
            entity: EntityRef::Vulnerability(c.clone()),
            name: c.to_string(),
            parent: None,
            severity: Some(Severity::of(g.score(c))),
        })
        .collect();

    Ok(LayeredGraph {
        top: vec![LayerNode { entity: repo_ref, name: repository.name.clone(), parent: None, severity: None }],
        middle,
        bottom,
        edges: edges.into_iter().collect(),
    })
}
