use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cells;
use crate::graph::{OrgGraph, RowNode, RowTree};
use crate::model::{EntityRef, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SortKey {
    MostSevere,
    VulnerabilityCount,
    LinkCount,
    Name,
}

impl SortKey {
    pub fn default_direction(self) -> Direction {
        match self {
            SortKey::Name => Direction::Asc,
            _ => Direction::Desc,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SortKey::MostSevere => "most-severe",
            SortKey::VulnerabilityCount => "vuln-count",
            SortKey::LinkCount => "link-count",
            SortKey::Name => "name",
        }
    }
}

impl FromStr for SortKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "most-severe" | "mostSevere" => Ok(SortKey::MostSevere),
            "vuln-count" | "vulnerabilityCount" => Ok(SortKey::VulnerabilityCount),
            "link-count" | "linkCount" => Ok(SortKey::LinkCount),
            "name" => Ok(SortKey::Name),
            other => Err(format!("unknown sort key {other:?}")),
        }
    }
}

impl fmt::Display for SortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Asc,
    Desc,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "asc" => Ok(Direction::Asc),
            "desc" => Ok(Direction::Desc),
            other => Err(format!("unknown sort direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortSpec {
    pub direction: Direction,
    pub key: SortKey,
}

impl SortSpec {
    pub fn new(key: SortKey) -> Self {
        Self { key, direction: key.default_direction() }
    }
}

impl Default for SortSpec {
    fn default() -> Self {
        SortSpec::new(SortKey::MostSevere)
    }
}

/// Per-entity part of a sort key; the same entity recurs across a tree.
struct EntityKey {
    max: i64,
    critical: i64,
    count: i64,
    name: Rc<str>,
}

struct RowKey {
    primary: [i64; 3],
    name: Rc<str>,
    entity: EntityRef,
}

type KeyCache = HashMap<EntityRef, Rc<EntityKey>>;

fn entity_key(g: &OrgGraph, entity: &EntityRef, cache: &mut KeyCache) -> Rc<EntityKey> {
    if let Some(k) = cache.get(entity) {
        return k.clone();
    }
    let k = Rc::new(EntityKey {
        max: g.max_score(entity).map_or(-1, |s| i64::from(s.tenths())),
        critical: cells::severity_histogram(g, entity).map_or(0, |h| h.get(Severity::Critical)) as i64,
        count: cells::vuln_count(g, entity).unwrap_or(0) as i64,
        name: g.display_name(entity).unwrap_or_default().into(),
    });
    cache.insert(entity.clone(), k.clone());
    k
}

fn row_key(g: &OrgGraph, row: &RowNode, key: SortKey, cache: &mut KeyCache) -> RowKey {
    let k = entity_key(g, &row.entity, cache);
    let primary = match key {
        SortKey::MostSevere => [k.max, k.critical, k.count],
        SortKey::VulnerabilityCount => [k.count, k.max, 0],
        SortKey::LinkCount => [row.link_count() as i64, 0, 0],
        SortKey::Name => [0, 0, 0],
    };
    RowKey { primary, name: k.name.clone(), entity: row.entity.clone() }
}

/// Reorders every sibling group.
///
/// `MostSevere` compares the highest subtree score, then the number of
/// critical CVEs, then the vulnerability count. `VulnerabilityCount`
/// compares the count, then the highest score. The direction applies to
/// those keys (and to the name for `Name`); remaining ties fall back to the
/// name ascending and finally the entity id, so the order is total.
pub fn sort_rows(g: &OrgGraph, tree: &RowTree, spec: SortSpec) -> RowTree {
    let mut rows = tree.rows.clone();
    sort_group(g, &mut rows, spec, &mut KeyCache::new());
    RowTree { ordering: tree.ordering, rows }
}

fn sort_group(g: &OrgGraph, rows: &mut Vec<RowNode>, spec: SortSpec, cache: &mut KeyCache) {
    let mut keyed: Vec<(RowKey, RowNode)> = rows.drain(..).map(|r| (row_key(g, &r, spec.key, cache), r)).collect();
    keyed.sort_by(|(a, _), (b, _)| compare(a, b, spec));
    rows.extend(keyed.into_iter().map(|(_, r)| r));
    for row in rows.iter_mut() {
        sort_group(g, &mut row.children, spec, cache);
    }
}

fn compare(a: &RowKey, b: &RowKey, spec: SortSpec) -> Ordering {
    let directed = |o: Ordering| if spec.direction == Direction::Desc { o.reverse() } else { o };
    let primary = if spec.key == SortKey::Name { directed(a.name.cmp(&b.name)) } else { directed(a.primary.cmp(&b.primary)) };
    primary.then_with(|| a.name.cmp(&b.name)).then_with(|| a.entity.cmp(&b.entity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, project_tree, TreeOrdering};
    use crate::testkit::DocBuilder;

    fn libraries(scores: &[(&str, &[f64])]) -> OrgGraph {
        let mut b = DocBuilder::new("r").module("m", None);
        let mut n = 0;
        for (lib, cves) in scores {
            b = b.library(lib, "g", lib, "1").depends("m", lib);
            for s in *cves {
                n += 1;
                let id = format!("CVE-2020-{n:04}");
                b = b.cve(&id, Some(*s)).affects(lib, &id);
            }
        }
        build_graph(&[b.build()]).unwrap()
    }

    fn names(g: &OrgGraph, tree: &RowTree) -> Vec<String> {
        tree.rows.iter().map(|r| g.library(r.entity.id()).unwrap().coordinates.artifact.clone()).collect()
    }

    #[test]
    fn most_severe_with_tie_break() {
        let g = libraries(&[("a", &[9.8]), ("b", &[7.2]), ("c", &[9.8, 9.1])]);
        let tree = project_tree(&g, TreeOrdering::LibraryCentered);
        let sorted = sort_rows(&g, &tree, SortSpec::new(SortKey::MostSevere));
        // c has two critical CVEs against a's one
        assert_eq!(names(&g, &sorted), ["c", "a", "b"]);
        let asc = sort_rows(&g, &tree, SortSpec { key: SortKey::MostSevere, direction: Direction::Asc });
        assert_eq!(names(&g, &asc), ["b", "a", "c"]);
    }

    #[test]
    fn name_and_count_keys() {
        let g = libraries(&[("zeta", &[5.0]), ("alpha", &[5.0, 6.0]), ("mid", &[1.0, 2.0, 3.0])]);
        let tree = project_tree(&g, TreeOrdering::LibraryCentered);
        assert_eq!(names(&g, &sort_rows(&g, &tree, SortSpec::new(SortKey::Name))), ["alpha", "mid", "zeta"]);
        let desc = SortSpec { key: SortKey::Name, direction: Direction::Desc };
        assert_eq!(names(&g, &sort_rows(&g, &tree, desc)), ["zeta", "mid", "alpha"]);
        assert_eq!(
            names(&g, &sort_rows(&g, &tree, SortSpec::new(SortKey::VulnerabilityCount))),
            ["mid", "alpha", "zeta"]
        );
        assert_eq!(names(&g, &sort_rows(&g, &tree, SortSpec::new(SortKey::LinkCount))), ["mid", "alpha", "zeta"]);
    }

    #[test]
    fn empty_tree_stays_empty() {
        let g = build_graph(&[]).unwrap();
        let tree = project_tree(&g, TreeOrdering::BugCentered);
        assert!(sort_rows(&g, &tree, SortSpec::default()).rows.is_empty());
    }

    #[test]
    fn keys_parse() {
        assert_eq!("most-severe".parse::<SortKey>().unwrap(), SortKey::MostSevere);
        assert_eq!("linkCount".parse::<SortKey>().unwrap(), SortKey::LinkCount);
        assert!("severity".parse::<SortKey>().is_err());
        assert_eq!("asc".parse::<Direction>().unwrap(), Direction::Asc);
    }
}
