//! Projection of the exposure relation into the three table orderings.

use std::cmp::Reverse;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExposureQuadruple, OrgGraph};
use crate::model::{CveId, Digest, EntityKind, EntityRef, ModuleId, RepoId};

/// Serialized as the short view name; deserialization also accepts the
/// aliases of `FromStr` and the camelCase variant names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TreeOrdering {
    /// repository → module (nested) → library → bug
    RepositoryCentered,
    /// library → bug → repository → module
    LibraryCentered,
    /// bug → library → repository → module
    BugCentered,
}

impl TreeOrdering {
    pub const ALL: [TreeOrdering; 3] =
        [TreeOrdering::RepositoryCentered, TreeOrdering::LibraryCentered, TreeOrdering::BugCentered];

    /// Level sequence of the ordering. In the repository-centered view the
    /// module level may repeat for nested sub-modules.
    pub fn levels(self) -> [EntityKind; 4] {
        use EntityKind::*;
        match self {
            TreeOrdering::RepositoryCentered => [Repository, Module, Library, Vulnerability],
            TreeOrdering::LibraryCentered => [Library, Vulnerability, Repository, Module],
            TreeOrdering::BugCentered => [Vulnerability, Library, Repository, Module],
        }
    }

    pub fn top_level(self) -> EntityKind {
        self.levels()[0]
    }

    /// Short view name used by the HTTP API and CLI.
    pub fn view_name(self) -> &'static str {
        match self {
            TreeOrdering::RepositoryCentered => "repositories",
            TreeOrdering::LibraryCentered => "libraries",
            TreeOrdering::BugCentered => "bugs",
        }
    }
}

impl fmt::Display for TreeOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.view_name())
    }
}

impl FromStr for TreeOrdering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "repositories" | "repository" | "repo" | "repositoryCentered" => Ok(TreeOrdering::RepositoryCentered),
            "libraries" | "library" | "lib" | "libraryCentered" => Ok(TreeOrdering::LibraryCentered),
            "bugs" | "bug" | "vulnerabilities" | "cves" | "bugCentered" => Ok(TreeOrdering::BugCentered),
            other => Err(format!("unknown view {other:?} (expected repositories, libraries or bugs)")),
        }
    }
}

impl Serialize for TreeOrdering {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.view_name())
    }
}

impl<'de> Deserialize<'de> for TreeOrdering {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowNode {
    pub entity: EntityRef,
    pub children: Vec<RowNode>,
}

impl RowNode {
    fn leaf(entity: EntityRef) -> Self {
        Self { entity, children: Vec::new() }
    }

    pub fn level(&self) -> EntityKind {
        self.entity.kind()
    }

    /// Number of entities on the next level.
    pub fn link_count(&self) -> usize {
        self.children.len()
    }

    fn count(&self) -> usize {
        1 + self.children.iter().map(RowNode::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowTree {
    pub ordering: TreeOrdering,
    pub rows: Vec<RowNode>,
}

impl RowTree {
    /// Total number of rows at every depth.
    pub fn row_count(&self) -> usize {
        self.rows.iter().map(RowNode::count).sum()
    }

    /// Number of rows at each depth, starting with the top level.
    pub fn rows_per_depth(&self) -> Vec<usize> {
        let mut counts = Vec::new();
        let mut level: Vec<&RowNode> = self.rows.iter().collect();
        while !level.is_empty() {
            counts.push(level.len());
            level = level.iter().flat_map(|n| n.children.iter()).collect();
        }
        counts
    }

    /// Follows a path of entity refs from the top level.
    pub fn find(&self, path: &[EntityRef]) -> Option<&RowNode> {
        let (first, rest) = path.split_first()?;
        let mut node = self.rows.iter().find(|n| &n.entity == first)?;
        for step in rest {
            node = node.children.iter().find(|n| &n.entity == step)?;
        }
        Some(node)
    }

    /// Reads the exposure relation back out of the tree's complete paths.
    pub fn quadruples(&self, g: &OrgGraph) -> Vec<ExposureQuadruple> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        for row in &self.rows {
            collect_paths(self.ordering, g, row, &mut path, &mut out);
        }
        out.sort();
        out
    }
}

fn collect_paths<'a>(
    ordering: TreeOrdering,
    g: &OrgGraph,
    node: &'a RowNode,
    path: &mut Vec<&'a EntityRef>,
    out: &mut Vec<ExposureQuadruple>,
) {
    path.push(&node.entity);
    if node.children.is_empty() {
        if let Some(q) = quadruple_from_path(ordering, g, path) {
            out.push(q);
        }
    }
    for child in &node.children {
        collect_paths(ordering, g, child, path, out);
    }
    path.pop();
}

fn quadruple_from_path(ordering: TreeOrdering, g: &OrgGraph, path: &[&EntityRef]) -> Option<ExposureQuadruple> {
    let mut repo = None;
    let mut modules = Vec::new();
    let mut library = None;
    let mut cve = None;
    for e in path {
        match e {
            EntityRef::Repository(id) => repo = Some(id.clone()),
            EntityRef::Module(id) => modules.push(id.clone()),
            EntityRef::Library(id) => library = Some(id.clone()),
            EntityRef::Vulnerability(id) => cve = Some(id.clone()),
        }
    }
    let module_path = match ordering {
        TreeOrdering::RepositoryCentered => modules,
        // flat module level: the leaf module's ancestry comes from the graph
        _ => g.module_path(modules.last()?).to_vec(),
    };
    if module_path.is_empty() {
        return None;
    }
    Some(ExposureQuadruple { repository_id: repo?, module_path, library_digest: library?, cve_id: cve? })
}

/// Projects the graph into one ordering.
///
/// A child appears under a parent iff an exposure connects them. The
/// repository-centered view additionally lists every repository and module,
/// including vulnerability-free ones, so they can be shown or filtered out.
/// Siblings are ordered by highest CVSS score (descending), then distinct
/// vulnerability count (descending), then name.
pub fn project_tree(g: &OrgGraph, ordering: TreeOrdering) -> RowTree {
    let mut rows: Vec<RowNode> = match ordering {
        TreeOrdering::RepositoryCentered => g.repositories.keys().map(|r| repository_node(g, r)).collect(),
        TreeOrdering::LibraryCentered => g
            .libraries
            .keys()
            .filter(|l| is_exposed_library(g, l))
            .map(|l| {
                let children = g.library_cves(l).iter().map(|c| consumers(g, EntityRef::Vulnerability(c.clone()), l)).collect();
                RowNode { entity: EntityRef::Library(l.clone()), children }
            })
            .collect(),
        TreeOrdering::BugCentered => g
            .vulnerabilities
            .keys()
            .filter_map(|c| {
                let children: Vec<RowNode> = g
                    .cve_libraries(c)
                    .iter()
                    .filter(|l| !g.library_modules(l).is_empty())
                    .map(|l| consumers(g, EntityRef::Library(l.clone()), l))
                    .collect();
                (!children.is_empty()).then(|| RowNode { entity: EntityRef::Vulnerability(c.clone()), children })
            })
            .collect(),
    };
    default_order(g, &mut rows);
    RowTree { ordering, rows }
}

fn is_exposed_library(g: &OrgGraph, lib: &Digest) -> bool {
    !g.library_cves(lib).is_empty() && !g.library_modules(lib).is_empty()
}

fn repository_node(g: &OrgGraph, repo: &RepoId) -> RowNode {
    let children = g.top_level_modules(repo).iter().map(|m| module_node(g, m)).collect();
    RowNode { entity: EntityRef::Repository(repo.clone()), children }
}

fn module_node(g: &OrgGraph, module: &ModuleId) -> RowNode {
    let mut children: Vec<RowNode> = g.child_modules(module).iter().map(|m| module_node(g, m)).collect();
    for lib in g.module_libraries(module) {
        let cves = g.library_cves(lib);
        if cves.is_empty() {
            continue;
        }
        children.push(RowNode {
            entity: EntityRef::Library(lib.clone()),
            children: cves.iter().map(|c: &CveId| RowNode::leaf(EntityRef::Vulnerability(c.clone()))).collect(),
        });
    }
    RowNode { entity: EntityRef::Module(module.clone()), children }
}

/// `entity` → repositories using `lib` → the modules that depend on it directly.
fn consumers(g: &OrgGraph, entity: EntityRef, lib: &Digest) -> RowNode {
    let modules = g.library_modules(lib);
    let children = g
        .library_repositories(lib)
        .iter()
        .map(|r| RowNode {
            entity: EntityRef::Repository(r.clone()),
            children: modules
                .iter()
                .filter(|m| &g.modules[*m].repository_id == r)
                .map(|m| RowNode::leaf(EntityRef::Module(m.clone())))
                .collect(),
        })
        .collect();
    RowNode { entity, children }
}

fn default_order(g: &OrgGraph, rows: &mut [RowNode]) {
    rows.sort_by_cached_key(|n| {
        let max = g.max_score(&n.entity).map_or(-1, |s| i16::from(s.tenths()));
        let count = g.vulns_of(&n.entity).map_or(0, |v| v.len());
        let name = g.display_name(&n.entity).unwrap_or_default();
        (Reverse(max), Reverse(count), name, n.entity.clone())
    });
    for row in rows {
        default_order(g, &mut row.children);
    }
}
