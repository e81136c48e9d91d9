//! The organization exposure graph.
//!
//! Repositories own a module hierarchy; modules depend on libraries; libraries
//! are affected by CVEs. Libraries and CVEs are global nodes merged by digest
//! and CVE id. The graph is frozen after construction and every query is a
//! pure read.

mod layers;
mod tree;

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{AffectsDecl, ModuleDecl, ScanDocument, FORMAT_VERSION};
use crate::model::{
    AffectsEdge, Coordinates, CveId, CvssScore, DependsEdge, Digest, EntityRef, Library, Module,
    ModuleId, RepoId, Repository, Vulnerability,
};

pub use layers::{dependency_graph_view, LayerNode, LayeredGraph};
pub use tree::{project_tree, RowNode, RowTree, TreeOrdering};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate repository id {0}")]
    DuplicateRepository(RepoId),
    #[error("module id {0} declared by more than one repository")]
    DuplicateModule(ModuleId),
    #[error("digest {digest} maps to both {first} and {second}")]
    DigestConflict { digest: Digest, first: Box<Coordinates>, second: Box<Coordinates> },
    #[error("unknown entity {0}")]
    UnknownEntity(EntityRef),
}

/// One exposure: a repository's module (given as its root-to-leaf path)
/// depends on a library that is affected by a CVE.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExposureQuadruple {
    pub repository_id: RepoId,
    pub module_path: Vec<ModuleId>,
    pub library_digest: Digest,
    pub cve_id: CveId,
}

/// Per-repository record of what its scan declared, kept so the graph can be
/// written back out as scan documents.
#[derive(Debug, Clone, Default, PartialEq)]
struct Provenance {
    scan_timestamp: String,
    libraries: BTreeSet<Digest>,
    cves: BTreeSet<CveId>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Index {
    repo_modules: BTreeMap<RepoId, Vec<ModuleId>>,
    repo_top_modules: BTreeMap<RepoId, Vec<ModuleId>>,
    module_children: BTreeMap<ModuleId, Vec<ModuleId>>,
    module_paths: BTreeMap<ModuleId, Vec<ModuleId>>,
    module_libraries: BTreeMap<ModuleId, BTreeSet<Digest>>,
    library_modules: BTreeMap<Digest, BTreeSet<ModuleId>>,
    library_cves: BTreeMap<Digest, BTreeSet<CveId>>,
    library_repos: BTreeMap<Digest, BTreeSet<RepoId>>,
    cve_libraries: BTreeMap<CveId, BTreeSet<Digest>>,
    cve_repos: BTreeMap<CveId, BTreeSet<RepoId>>,
    module_vulns: BTreeMap<ModuleId, BTreeSet<CveId>>,
    repo_vulns: BTreeMap<RepoId, BTreeSet<CveId>>,
    repo_libraries: BTreeMap<RepoId, BTreeSet<Digest>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrgGraph {
    repositories: BTreeMap<RepoId, Repository>,
    modules: BTreeMap<ModuleId, Module>,
    libraries: BTreeMap<Digest, Library>,
    vulnerabilities: BTreeMap<CveId, Vulnerability>,
    depends: BTreeSet<DependsEdge>,
    affects: BTreeSet<AffectsEdge>,
    reachability: BTreeMap<AffectsEdge, bool>,
    provenance: BTreeMap<RepoId, Provenance>,
    index: Index,
}

static NO_CVES: BTreeSet<CveId> = BTreeSet::new();
static NO_REPOS: BTreeSet<RepoId> = BTreeSet::new();
static NO_DIGESTS: BTreeSet<Digest> = BTreeSet::new();
static NO_MODULES: BTreeSet<ModuleId> = BTreeSet::new();

/// Builds the graph from individually valid documents.
///
/// Documents are merged in repository-id order, so the result does not depend
/// on the order of `docs`. When the same library or CVE is declared more than
/// once, the first declaration wins field by field and later ones only fill
/// gaps.
pub fn build_graph(docs: &[ScanDocument]) -> Result<OrgGraph, GraphError> {
    let mut sorted: Vec<&ScanDocument> = docs.iter().collect();
    sorted.sort_by(|a, b| a.repository.id.cmp(&b.repository.id));

    let mut g = OrgGraph::default();
    for doc in sorted {
        let repo_id = doc.repository.id.clone();
        if g.repositories.contains_key(&repo_id) {
            return Err(GraphError::DuplicateRepository(repo_id));
        }
        g.repositories.insert(repo_id.clone(), doc.repository.clone());

        for m in &doc.modules {
            if g.modules.contains_key(&m.id) {
                return Err(GraphError::DuplicateModule(m.id.clone()));
            }
            g.modules.insert(
                m.id.clone(),
                Module {
                    id: m.id.clone(),
                    name: m.name.clone(),
                    repository_id: repo_id.clone(),
                    parent_module_id: m.parent_id.clone(),
                },
            );
        }

        for lib in &doc.libraries {
            match g.libraries.get_mut(&lib.digest) {
                Some(existing) if existing.coordinates != lib.coordinates => {
                    return Err(GraphError::DigestConflict {
                        digest: lib.digest.clone(),
                        first: Box::new(existing.coordinates.clone()),
                        second: Box::new(lib.coordinates.clone()),
                    });
                }
                Some(existing) => merge_meta(&mut existing.meta, &lib.meta),
                None => {
                    g.libraries.insert(lib.digest.clone(), lib.clone());
                }
            }
        }

        for v in &doc.vulnerabilities {
            match g.vulnerabilities.get_mut(&v.cve_id) {
                Some(existing) => {
                    existing.cvss_score = existing.cvss_score.or(v.cvss_score);
                    if existing.cvss_vector.is_none() {
                        existing.cvss_vector.clone_from(&v.cvss_vector);
                    }
                    if existing.description.is_none() {
                        existing.description.clone_from(&v.description);
                    }
                }
                None => {
                    g.vulnerabilities.insert(v.cve_id.clone(), v.clone());
                }
            }
        }

        g.depends.extend(doc.dependencies.iter().cloned());
        for a in &doc.affects {
            let edge = a.edge();
            if let Some(r) = a.reachable {
                g.reachability.entry(edge.clone()).or_insert(r);
            }
            g.affects.insert(edge);
        }

        g.provenance.insert(
            repo_id,
            Provenance {
                scan_timestamp: doc.scan_timestamp.clone(),
                libraries: doc.libraries.iter().map(|l| l.digest.clone()).collect(),
                cves: doc.vulnerabilities.iter().map(|v| v.cve_id.clone()).collect(),
            },
        );
    }
    g.reindex();
    Ok(g)
}

fn merge_meta(into: &mut Option<crate::model::QualityMeta>, from: &Option<crate::model::QualityMeta>) {
    match (into.as_mut(), from) {
        (Some(existing), Some(other)) => existing.fill_from(other),
        (None, Some(other)) => *into = Some(other.clone()),
        _ => {}
    }
}

impl OrgGraph {
    fn reindex(&mut self) {
        let mut ix = Index::default();

        for m in self.modules.values() {
            ix.repo_modules.entry(m.repository_id.clone()).or_default().push(m.id.clone());
            match &m.parent_module_id {
                Some(parent) => ix.module_children.entry(parent.clone()).or_default().push(m.id.clone()),
                None => ix.repo_top_modules.entry(m.repository_id.clone()).or_default().push(m.id.clone()),
            }
        }
        for id in self.modules.keys() {
            let mut path = vec![id.clone()];
            let mut cursor = self.modules[id].parent_module_id.as_ref();
            while let Some(p) = cursor {
                path.push(p.clone());
                cursor = self.modules[p].parent_module_id.as_ref();
            }
            path.reverse();
            ix.module_paths.insert(id.clone(), path);
        }

        for d in &self.depends {
            ix.module_libraries.entry(d.module_id.clone()).or_default().insert(d.library_digest.clone());
            ix.library_modules.entry(d.library_digest.clone()).or_default().insert(d.module_id.clone());
            let repo = self.modules[&d.module_id].repository_id.clone();
            ix.library_repos.entry(d.library_digest.clone()).or_default().insert(repo.clone());
            ix.repo_libraries.entry(repo).or_default().insert(d.library_digest.clone());
        }
        for a in &self.affects {
            ix.library_cves.entry(a.library_digest.clone()).or_default().insert(a.cve_id.clone());
            ix.cve_libraries.entry(a.cve_id.clone()).or_default().insert(a.library_digest.clone());
        }
        for (cve, libs) in &ix.cve_libraries {
            let repos: BTreeSet<RepoId> = libs
                .iter()
                .filter_map(|l| ix.library_repos.get(l))
                .flatten()
                .cloned()
                .collect();
            ix.cve_repos.insert(cve.clone(), repos);
        }

        // direct exposure per module, then pushed up every ancestor
        for (module, libs) in &ix.module_libraries {
            let direct: BTreeSet<CveId> =
                libs.iter().filter_map(|l| ix.library_cves.get(l)).flatten().cloned().collect();
            if direct.is_empty() {
                continue;
            }
            for ancestor in &ix.module_paths[module] {
                ix.module_vulns.entry(ancestor.clone()).or_default().extend(direct.iter().cloned());
            }
            let repo = &self.modules[module].repository_id;
            ix.repo_vulns.entry(repo.clone()).or_default().extend(direct.iter().cloned());
        }

        for list in ix.repo_modules.values_mut().chain(ix.repo_top_modules.values_mut()) {
            list.sort();
        }
        for list in ix.module_children.values_mut() {
            list.sort();
        }
        self.index = ix;
    }

    pub fn is_empty(&self) -> bool {
        self.repositories.is_empty()
    }

    pub fn repositories(&self) -> impl Iterator<Item = &Repository> {
        self.repositories.values()
    }

    pub fn modules(&self) -> impl Iterator<Item = &Module> {
        self.modules.values()
    }

    pub fn libraries(&self) -> impl Iterator<Item = &Library> {
        self.libraries.values()
    }

    pub fn vulnerabilities(&self) -> impl Iterator<Item = &Vulnerability> {
        self.vulnerabilities.values()
    }

    pub fn depends_edges(&self) -> impl Iterator<Item = &DependsEdge> {
        self.depends.iter()
    }

    pub fn affects_edges(&self) -> impl Iterator<Item = &AffectsEdge> {
        self.affects.iter()
    }

    pub fn repository(&self, id: &str) -> Option<&Repository> {
        self.repositories.get(id)
    }

    pub fn module(&self, id: &str) -> Option<&Module> {
        self.modules.get(id)
    }

    pub fn library(&self, digest: &str) -> Option<&Library> {
        self.libraries.get(digest)
    }

    pub fn vulnerability(&self, id: &str) -> Option<&Vulnerability> {
        self.vulnerabilities.get(id)
    }

    pub fn contains(&self, entity: &EntityRef) -> bool {
        match entity {
            EntityRef::Repository(id) => self.repositories.contains_key(id),
            EntityRef::Module(id) => self.modules.contains_key(id),
            EntityRef::Library(id) => self.libraries.contains_key(id),
            EntityRef::Vulnerability(id) => self.vulnerabilities.contains_key(id),
        }
    }

    fn ensure(&self, entity: &EntityRef) -> Result<(), GraphError> {
        if self.contains(entity) {
            Ok(())
        } else {
            Err(GraphError::UnknownEntity(entity.clone()))
        }
    }

    /// Display name: repository/module name, library coordinates, or CVE id.
    pub fn display_name(&self, entity: &EntityRef) -> Option<String> {
        match entity {
            EntityRef::Repository(id) => self.repositories.get(id).map(|r| r.name.clone()),
            EntityRef::Module(id) => self.modules.get(id).map(|m| m.name.clone()),
            EntityRef::Library(id) => self.libraries.get(id).map(Library::display_name),
            EntityRef::Vulnerability(id) => self.vulnerabilities.get(id).map(|v| v.cve_id.to_string()),
        }
    }

    pub fn score(&self, cve: &CveId) -> Option<CvssScore> {
        self.vulnerabilities.get(cve).and_then(|v| v.cvss_score)
    }

    /// All modules of a repository, sorted by id.
    pub fn repository_modules(&self, repo: &RepoId) -> &[ModuleId] {
        self.index.repo_modules.get(repo).map_or(&[], Vec::as_slice)
    }

    pub fn top_level_modules(&self, repo: &RepoId) -> &[ModuleId] {
        self.index.repo_top_modules.get(repo).map_or(&[], Vec::as_slice)
    }

    pub fn child_modules(&self, module: &ModuleId) -> &[ModuleId] {
        self.index.module_children.get(module).map_or(&[], Vec::as_slice)
    }

    /// Root-to-leaf module id sequence ending at `module`.
    pub fn module_path(&self, module: &ModuleId) -> &[ModuleId] {
        self.index.module_paths.get(module).map_or(&[], Vec::as_slice)
    }

    /// Libraries a module depends on directly.
    pub fn module_libraries(&self, module: &ModuleId) -> &BTreeSet<Digest> {
        self.index.module_libraries.get(module).unwrap_or(&NO_DIGESTS)
    }

    pub fn library_modules(&self, library: &Digest) -> &BTreeSet<ModuleId> {
        self.index.library_modules.get(library).unwrap_or(&NO_MODULES)
    }

    pub fn library_repositories(&self, library: &Digest) -> &BTreeSet<RepoId> {
        self.index.library_repos.get(library).unwrap_or(&NO_REPOS)
    }

    pub fn library_cves(&self, library: &Digest) -> &BTreeSet<CveId> {
        self.index.library_cves.get(library).unwrap_or(&NO_CVES)
    }

    pub fn cve_libraries(&self, cve: &CveId) -> &BTreeSet<Digest> {
        self.index.cve_libraries.get(cve).unwrap_or(&NO_DIGESTS)
    }

    /// Distinct libraries used by any module of the repository.
    pub fn repository_libraries(&self, repo: &RepoId) -> &BTreeSet<Digest> {
        self.index.repo_libraries.get(repo).unwrap_or(&NO_DIGESTS)
    }

    /// Distinct CVE ids an entity is exposed to.
    ///
    /// Library: its affects set. Module: union over the module and its
    /// descendants. Repository: union over all its modules. CVE: itself.
    pub fn vulns_of(&self, entity: &EntityRef) -> Result<Cow<'_, BTreeSet<CveId>>, GraphError> {
        self.ensure(entity)?;
        Ok(match entity {
            EntityRef::Repository(id) => Cow::Borrowed(self.index.repo_vulns.get(id).unwrap_or(&NO_CVES)),
            EntityRef::Module(id) => Cow::Borrowed(self.index.module_vulns.get(id).unwrap_or(&NO_CVES)),
            EntityRef::Library(id) => Cow::Borrowed(self.library_cves(id)),
            EntityRef::Vulnerability(id) => Cow::Owned(BTreeSet::from([id.clone()])),
        })
    }

    /// Distinct repositories with a module depending on a library affected by `cve`.
    pub fn repos_affected_by(&self, cve: &CveId) -> Result<&BTreeSet<RepoId>, GraphError> {
        if !self.vulnerabilities.contains_key(cve) {
            return Err(GraphError::UnknownEntity(EntityRef::Vulnerability(cve.clone())));
        }
        Ok(self.index.cve_repos.get(cve).unwrap_or(&NO_REPOS))
    }

    /// Highest score among the entity's CVEs; `None` when none is scored.
    pub fn max_score(&self, entity: &EntityRef) -> Option<CvssScore> {
        self.vulns_of(entity).ok()?.iter().filter_map(|c| self.score(c)).max()
    }

    /// One quadruple per depends edge composed with an affects edge, in
    /// sorted order.
    pub fn exposure_quadruples(&self) -> Vec<ExposureQuadruple> {
        let mut out = Vec::new();
        for d in &self.depends {
            let repository_id = &self.modules[&d.module_id].repository_id;
            for cve in self.library_cves(&d.library_digest) {
                out.push(ExposureQuadruple {
                    repository_id: repository_id.clone(),
                    module_path: self.module_path(&d.module_id).to_vec(),
                    library_digest: d.library_digest.clone(),
                    cve_id: cve.clone(),
                });
            }
        }
        out.sort();
        out
    }

    pub(crate) fn repository_mut(&mut self, id: &RepoId) -> Option<&mut Repository> {
        self.repositories.get_mut(id)
    }

    pub(crate) fn module_mut(&mut self, id: &ModuleId) -> Option<&mut Module> {
        self.modules.get_mut(id)
    }

    pub(crate) fn library_mut(&mut self, digest: &Digest) -> Option<&mut Library> {
        self.libraries.get_mut(digest)
    }

    /// Splits the graph back into one scan document per repository.
    /// `build_graph(&g.to_documents())` reproduces `g`.
    pub fn to_documents(&self) -> Vec<ScanDocument> {
        self.repositories
            .values()
            .map(|repo| {
                let prov = self.provenance.get(&repo.id).cloned().unwrap_or_default();
                let modules: Vec<ModuleDecl> = self
                    .repository_modules(&repo.id)
                    .iter()
                    .map(|id| {
                        let m = &self.modules[id];
                        ModuleDecl { id: m.id.clone(), name: m.name.clone(), parent_id: m.parent_module_id.clone() }
                    })
                    .collect();
                let dependencies: Vec<DependsEdge> = self
                    .depends
                    .iter()
                    .filter(|d| self.modules[&d.module_id].repository_id == repo.id)
                    .cloned()
                    .collect();
                let mut lib_ids = prov.libraries.clone();
                lib_ids.extend(dependencies.iter().map(|d| d.library_digest.clone()));
                let mut cve_ids = prov.cves.clone();
                let mut affects = Vec::new();
                for lib in &lib_ids {
                    for cve in self.library_cves(lib) {
                        cve_ids.insert(cve.clone());
                        let edge = AffectsEdge { library_digest: lib.clone(), cve_id: cve.clone() };
                        let reachable = self.reachability.get(&edge).copied();
                        affects.push(AffectsDecl { library_digest: lib.clone(), cve_id: cve.clone(), reachable });
                    }
                }
                let mut doc = ScanDocument {
                    format_version: FORMAT_VERSION.to_owned(),
                    scan_timestamp: prov.scan_timestamp,
                    repository: repo.clone(),
                    modules,
                    libraries: lib_ids.iter().map(|d| self.libraries[d].clone()).collect(),
                    vulnerabilities: cve_ids.iter().map(|c| self.vulnerabilities[c].clone()).collect(),
                    dependencies,
                    affects,
                };
                doc.normalize();
                doc
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::DocBuilder;

    fn two_repos_sharing_a_library() -> Vec<ScanDocument> {
        vec![
            DocBuilder::new("r1")
                .module("r1-core", None)
                .library("shared", "org.example", "shared-lib", "1.0")
                .depends("r1-core", "shared")
                .cve("CVE-2020-0001", Some(7.5))
                .affects("shared", "CVE-2020-0001")
                .build(),
            DocBuilder::new("r2")
                .module("r2-core", None)
                .library("shared", "org.example", "shared-lib", "1.0")
                .depends("r2-core", "shared")
                .cve("CVE-2020-0001", Some(7.5))
                .affects("shared", "CVE-2020-0001")
                .build(),
        ]
    }

    #[test]
    fn shared_digest_becomes_one_node() {
        let g = build_graph(&two_repos_sharing_a_library()).unwrap();
        assert_eq!(g.libraries().count(), 1);
        let repos: Vec<_> = g.library_repositories(&"shared".into()).iter().map(RepoId::as_str).collect();
        assert_eq!(repos, ["r1", "r2"]);
    }

    #[test]
    fn empty_input_gives_empty_graph() {
        let g = build_graph(&[]).unwrap();
        assert!(g.is_empty());
        assert!(g.exposure_quadruples().is_empty());
    }

    #[test]
    fn duplicate_repository_is_named() {
        let mut docs = two_repos_sharing_a_library();
        docs[1].repository.id = "r1".into();
        docs[1].modules[0].id = "other".into();
        docs[1].dependencies[0].module_id = "other".into();
        assert_eq!(build_graph(&docs), Err(GraphError::DuplicateRepository("r1".into())));
    }

    #[test]
    fn digest_collision_with_different_coordinates() {
        let mut docs = two_repos_sharing_a_library();
        docs[1].libraries[0].coordinates.version = "2.0".into();
        assert!(matches!(build_graph(&docs), Err(GraphError::DigestConflict { .. })));
    }

    #[test]
    fn product_and_join_cases() {
        let doc = DocBuilder::new("r")
            .module("m", None)
            .library("l", "g", "a", "1")
            .depends("m", "l")
            .cve("CVE-2020-0001", Some(5.0))
            .cve("CVE-2020-0002", None)
            .affects("l", "CVE-2020-0001")
            .affects("l", "CVE-2020-0002")
            .build();
        assert_eq!(build_graph(&[doc]).unwrap().exposure_quadruples().len(), 2);

        let doc = DocBuilder::new("r")
            .module("m1", None)
            .module("m2", None)
            .module("m3", Some("m1"))
            .library("l", "g", "a", "1")
            .depends("m1", "l")
            .depends("m2", "l")
            .depends("m3", "l")
            .cve("CVE-2020-0001", Some(5.0))
            .affects("l", "CVE-2020-0001")
            .build();
        let g = build_graph(&[doc]).unwrap();
        let quads = g.exposure_quadruples();
        assert_eq!(quads.len(), 3);
        let nested = quads.iter().find(|q| q.module_path.len() == 2).unwrap();
        assert_eq!(nested.module_path, vec![ModuleId::new("m1"), ModuleId::new("m3")]);

        let doc = DocBuilder::new("r").module("m", None).library("l", "g", "a", "1").depends("m", "l").build();
        assert!(build_graph(&[doc]).unwrap().exposure_quadruples().is_empty());
    }

    #[test]
    fn vulns_of_dedups_shared_library() {
        let doc = DocBuilder::new("r")
            .module("m1", None)
            .module("m2", None)
            .module("clean", None)
            .library("l", "g", "a", "1")
            .depends("m1", "l")
            .depends("m2", "l")
            .cve("CVE-2020-0001", Some(5.0))
            .cve("CVE-2020-0002", Some(9.1))
            .affects("l", "CVE-2020-0001")
            .affects("l", "CVE-2020-0002")
            .build();
        let g = build_graph(&[doc]).unwrap();
        let repo = g.vulns_of(&EntityRef::Repository("r".into())).unwrap();
        assert_eq!(repo.len(), 2);
        assert!(g.vulns_of(&EntityRef::Module("clean".into())).unwrap().is_empty());
        assert_eq!(g.vulns_of(&EntityRef::Library("l".into())).unwrap().len(), 2);
        assert!(matches!(
            g.vulns_of(&EntityRef::Module("nope".into())),
            Err(GraphError::UnknownEntity(_))
        ));
    }

    #[test]
    fn repos_affected_by_counts_distinct_repositories() {
        let mut docs = Vec::new();
        for r in ["a", "b", "c"] {
            docs.push(
                DocBuilder::new(r)
                    .module(&format!("{r}-1"), None)
                    .module(&format!("{r}-2"), None)
                    .library("l", "g", "a", "1")
                    .library("unused", "g", "u", "1")
                    .depends(&format!("{r}-1"), "l")
                    .depends(&format!("{r}-2"), "l")
                    .cve("CVE-2020-0001", Some(9.8))
                    .cve("CVE-2020-0009", Some(4.0))
                    .affects("l", "CVE-2020-0001")
                    .affects("unused", "CVE-2020-0009")
                    .build(),
            );
        }
        let g = build_graph(&docs).unwrap();
        assert_eq!(g.repos_affected_by(&"CVE-2020-0001".into()).unwrap().len(), 3);
        assert!(g.repos_affected_by(&"CVE-2020-0009".into()).unwrap().is_empty());
        assert!(g.repos_affected_by(&"CVE-1999-0001".into()).is_err());
    }

    #[test]
    fn documents_round_trip() {
        let docs = two_repos_sharing_a_library();
        let g = build_graph(&docs).unwrap();
        let again = build_graph(&g.to_documents()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn build_is_permutation_invariant() {
        let mut docs = two_repos_sharing_a_library();
        docs[1].vulnerabilities[0].description = Some("second".into());
        let forward = build_graph(&docs).unwrap();
        docs.reverse();
        assert_eq!(forward, build_graph(&docs).unwrap());
    }
}
