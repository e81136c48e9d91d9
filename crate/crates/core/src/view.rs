//! Table view requests and responses shared by the HTTP API and the report CLI.
//!
//! A response is computed as project → filter → sort → cells → paginate and
//! depends only on the snapshot and the request.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{
    apply_filters, cve_matrix, default_matrix_columns, dependency_count, score_strip, severity_histogram, sort_rows,
    vuln_count, AnalyticsError, FilterSpec, ScoreStrip, SeverityHistogram, SortSpec, DEFAULT_MATRIX_COLUMNS,
};
use crate::graph::{OrgGraph, RowNode, TreeOrdering};
use crate::model::{CveId, CvssScore, EntityRef, QualityMeta, Severity};
use crate::snapshot::Snapshot;

pub const DEFAULT_MAX_PAGE_SIZE: usize = 500;

#[derive(Debug, Error)]
pub enum ViewError {
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ViewRequest {
    pub view: TreeOrdering,
    pub filter: FilterSpec,
    pub sort: SortSpec,
    /// Row paths (top-level entity first) whose children are returned.
    /// Expanding a path also expands its prefixes.
    pub expand: Vec<Vec<EntityRef>>,
    pub expand_all: bool,
    /// Defaults to the organization's most widespread CVEs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_columns: Option<Vec<CveId>>,
    /// 1-based page over the top-level rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page_size: Option<usize>,
}

impl Default for ViewRequest {
    fn default() -> Self {
        Self {
            view: TreeOrdering::RepositoryCentered,
            filter: FilterSpec::default(),
            sort: SortSpec::default(),
            expand: Vec::new(),
            expand_all: false,
            matrix_columns: None,
            page: None,
            page_size: None,
        }
    }
}

impl ViewRequest {
    pub fn new(view: TreeOrdering) -> Self {
        Self { view, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ViewRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<ViewRow>>,
    pub dependency_count: usize,
    pub entity: EntityRef,
    pub histogram: SeverityHistogram,
    pub link_count: usize,
    /// Presence per matrix column.
    pub matrix: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_cvss: Option<CvssScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<QualityMeta>,
    pub name: String,
    pub score_strip: ScoreStrip,
    pub severity: Severity,
    pub vuln_count: usize,
}

impl ViewRow {
    /// Pre-order walk with each row's path from the top level.
    pub fn walk<'a>(&'a self, path: &mut Vec<&'a EntityRef>, f: &mut dyn FnMut(&[&'a EntityRef], &'a ViewRow)) {
        path.push(&self.entity);
        f(path, self);
        for child in self.children.iter().flatten() {
            child.walk(path, f);
        }
        path.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ViewResponse {
    pub applied_filter: FilterSpec,
    pub applied_sort: SortSpec,
    pub matrix_columns: Vec<CveId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page_size: Option<usize>,
    pub rows: Vec<ViewRow>,
    /// Top-level rows after filtering, before pagination.
    pub total_rows: usize,
    pub view: TreeOrdering,
}

impl ViewResponse {
    /// Compact JSON with sorted keys and a trailing LF. Field declarations
    /// follow key order, so this skips the intermediate `Value`.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("view responses serialize");
        out.push(b'\n');
        out
    }

    /// Visits every returned row in display order.
    pub fn walk_rows<'a>(&'a self, mut f: impl FnMut(&[&'a EntityRef], &'a ViewRow)) {
        let mut path = Vec::new();
        for row in &self.rows {
            row.walk(&mut path, &mut f);
        }
    }
}

/// Row cells that depend only on the entity.
#[derive(Clone)]
struct Cells {
    name: String,
    vuln_count: usize,
    dependency_count: usize,
    max_cvss: Option<CvssScore>,
    histogram: SeverityHistogram,
    score_strip: ScoreStrip,
    matrix: Vec<bool>,
    meta: Option<QualityMeta>,
}

struct Renderer<'a> {
    g: &'a OrgGraph,
    columns: &'a [CveId],
    expand: BTreeSet<Vec<EntityRef>>,
    expand_all: bool,
    cells: RefCell<HashMap<EntityRef, Cells>>,
}

impl Renderer<'_> {
    fn cells(&self, e: &EntityRef) -> Result<Cells, ViewError> {
        if let Some(c) = self.cells.borrow().get(e) {
            return Ok(c.clone());
        }
        let g = self.g;
        let meta = match e {
            EntityRef::Repository(id) => g.repository(id.as_str()).and_then(|r| r.meta.clone()),
            EntityRef::Library(id) => g.library(id.as_str()).and_then(|l| l.meta.clone()),
            _ => None,
        };
        let c = Cells {
            name: g.display_name(e).unwrap_or_default(),
            vuln_count: vuln_count(g, e)?,
            dependency_count: dependency_count(g, e)?,
            max_cvss: g.max_score(e),
            histogram: severity_histogram(g, e)?,
            score_strip: score_strip(g, e)?,
            matrix: cve_matrix(g, std::slice::from_ref(e), self.columns)?.cells.pop().unwrap_or_default(),
            meta,
        };
        self.cells.borrow_mut().insert(e.clone(), c.clone());
        Ok(c)
    }

    fn row(&self, node: &RowNode, path: &mut Vec<EntityRef>) -> Result<ViewRow, ViewError> {
        let e = &node.entity;
        path.push(e.clone());
        let children = if self.expand_all || self.expand.contains(path) {
            Some(node.children.iter().map(|c| self.row(c, path)).collect::<Result<Vec<_>, _>>()?)
        } else {
            None
        };
        path.pop();
        let c = self.cells(e)?;
        Ok(ViewRow {
            entity: e.clone(),
            name: c.name,
            link_count: node.link_count(),
            vuln_count: c.vuln_count,
            dependency_count: c.dependency_count,
            max_cvss: c.max_cvss,
            severity: Severity::of(c.max_cvss),
            histogram: c.histogram,
            score_strip: c.score_strip,
            matrix: c.matrix,
            meta: c.meta,
            children,
        })
    }
}

/// Computes a view with the default page-size limit.
pub fn render_view(snapshot: &Snapshot, req: &ViewRequest) -> Result<ViewResponse, ViewError> {
    render_view_with_limit(snapshot, req, DEFAULT_MAX_PAGE_SIZE)
}

pub fn render_view_with_limit(snapshot: &Snapshot, req: &ViewRequest, max_page_size: usize) -> Result<ViewResponse, ViewError> {
    let g = snapshot.graph();
    req.filter.validate()?;
    if req.page == Some(0) {
        return Err(ViewError::Invalid("page numbers start at 1".into()));
    }
    match req.page_size {
        Some(0) => return Err(ViewError::Invalid("pageSize must be at least 1".into())),
        Some(n) if n > max_page_size => return Err(ViewError::Invalid(format!("pageSize {n} exceeds the maximum of {max_page_size}"))),
        _ => {}
    }
    let columns = match &req.matrix_columns {
        Some(cols) => {
            if let Some(unknown) = cols.iter().find(|c| g.vulnerability(c.as_str()).is_none()) {
                return Err(AnalyticsError::UnknownColumn(unknown.clone()).into());
            }
            cols.clone()
        }
        None => default_matrix_columns(g, DEFAULT_MATRIX_COLUMNS)?,
    };

    let filtered = apply_filters(g, snapshot.tree(req.view), &req.filter)?;
    let sorted = sort_rows(g, &filtered, req.sort);
    let total_rows = sorted.rows.len();
    let (page, page_size) = match (req.page, req.page_size) {
        (None, None) => (None, None),
        (p, s) => (Some(p.unwrap_or(1)), Some(s.unwrap_or(max_page_size))),
    };
    let visible = match (page, page_size) {
        (Some(p), Some(s)) => sorted.rows.iter().skip((p - 1).saturating_mul(s)).take(s).collect::<Vec<_>>(),
        _ => sorted.rows.iter().collect(),
    };

    let mut expand = BTreeSet::new();
    for path in &req.expand {
        for end in 1..=path.len() {
            expand.insert(path[..end].to_vec());
        }
    }
    let renderer = Renderer { g, columns: &columns, expand, expand_all: req.expand_all, cells: RefCell::default() };
    let rows = visible.into_iter().map(|n| renderer.row(n, &mut Vec::new())).collect::<Result<Vec<_>, _>>()?;
    Ok(ViewResponse {
        view: req.view,
        total_rows,
        page,
        page_size,
        applied_filter: req.filter.clone(),
        applied_sort: req.sort,
        matrix_columns: columns,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::SortKey;
    use crate::graph::build_graph;
    use crate::testkit::{demo_organization, random_organization, RandomShape};

    fn demo() -> Snapshot {
        Snapshot::new(build_graph(&demo_organization()).unwrap())
    }

    #[test]
    fn library_view_leads_with_most_severe() {
        let s = demo();
        let req = ViewRequest { sort: SortSpec::new(SortKey::MostSevere), ..ViewRequest::new(TreeOrdering::LibraryCentered) };
        let resp = render_view(&s, &req).unwrap();
        let first = &resp.rows[0];
        assert!(first.name.contains("activemq-all"), "{}", first.name);
        assert_eq!(first.max_cvss.map(CvssScore::tenths), Some(98));
        assert_eq!((first.histogram.low, first.histogram.medium, first.histogram.high, first.histogram.critical), (1, 14, 3, 2));
        assert_eq!(first.dependency_count, 20);
        assert!(first.children.is_none());
    }

    #[test]
    fn critical_bug_count() {
        let s = demo();
        let mut req = ViewRequest::new(TreeOrdering::BugCentered);
        req.filter.min_cvss = Some(9.0);
        assert_eq!(render_view(&s, &req).unwrap().total_rows, 8);
    }

    #[test]
    fn empty_graph_has_no_rows() {
        let s = Snapshot::new(build_graph(&[]).unwrap());
        for view in TreeOrdering::ALL {
            let resp = render_view(&s, &ViewRequest::new(view)).unwrap();
            assert_eq!(resp.total_rows, 0);
            assert!(resp.matrix_columns.is_empty());
        }
    }

    #[test]
    fn expansion_returns_children_inline() {
        let s = demo();
        let top = render_view(&s, &ViewRequest::new(TreeOrdering::RepositoryCentered)).unwrap();
        let first = top.rows[0].entity.clone();
        let resp = render_view(&s, &ViewRequest { expand: vec![vec![first]], ..ViewRequest::new(TreeOrdering::RepositoryCentered) }).unwrap();
        let children = resp.rows[0].children.as_ref().unwrap();
        assert_eq!(children.len(), resp.rows[0].link_count);
        assert!(children.iter().all(|c| c.children.is_none()));
        assert!(resp.rows[1].children.is_none());
    }

    #[test]
    fn pages_partition_the_row_list() {
        let s = Snapshot::new(build_graph(&random_organization(7, RandomShape::default())).unwrap());
        let all = render_view(&s, &ViewRequest::new(TreeOrdering::RepositoryCentered)).unwrap();
        let mut joined = Vec::new();
        for page in 1.. {
            let req = ViewRequest { page: Some(page), page_size: Some(3), ..ViewRequest::new(TreeOrdering::RepositoryCentered) };
            let resp = render_view(&s, &req).unwrap();
            assert_eq!(resp.total_rows, all.total_rows);
            if resp.rows.is_empty() {
                break;
            }
            joined.extend(resp.rows);
        }
        assert_eq!(joined, all.rows);
    }

    #[test]
    fn rejects_bad_requests() {
        let s = demo();
        let too_big = ViewRequest { page_size: Some(501), ..Default::default() };
        assert!(matches!(render_view(&s, &too_big), Err(ViewError::Invalid(_))));
        let zero = ViewRequest { page: Some(0), ..Default::default() };
        assert!(matches!(render_view(&s, &zero), Err(ViewError::Invalid(_))));
        let unknown = ViewRequest { matrix_columns: Some(vec![CveId::new("CVE-1999-0001")]), ..Default::default() };
        assert!(matches!(render_view(&s, &unknown), Err(ViewError::Analytics(AnalyticsError::UnknownColumn(_)))));
        let mut inverted = ViewRequest::default();
        inverted.filter.min_cvss = Some(8.0);
        inverted.filter.max_cvss = Some(2.0);
        assert!(matches!(render_view(&s, &inverted), Err(ViewError::Analytics(AnalyticsError::InvalidFilter(_)))));
    }

    #[test]
    fn direct_serialization_has_sorted_keys() {
        use crate::enrich::{enrich_graph, FixtureProvider, MetaProvider};
        use crate::model::Grade;
        let g = build_graph(&demo_organization()).unwrap();
        let meta = QualityMeta {
            github_issues: Some(3),
            github_stars: Some(4),
            github_watchers: Some(5),
            lgtm_grade: Some(Grade::B),
            lgtm_score: Some(2.5),
        };
        let entries = [
            ("https://github.com/eclipse/eclipse-000".to_owned(), meta.clone()),
            ("org.apache.activemq:activemq-all:5.14.3".to_owned(), meta),
        ];
        let provider = FixtureProvider::new("all-fields", entries.into_iter().collect());
        let providers: [&dyn MetaProvider; 1] = [&provider];
        let s = Snapshot::new(enrich_graph(&g, &providers));
        let filter = FilterSpec {
            hide_unscored_cves: true,
            hide_vulnerability_free: true,
            max_cvss: Some(10.0),
            max_dependencies: Some(100),
            max_vulnerabilities: Some(100),
            min_cvss: Some(0.1),
            min_dependencies: Some(0),
            min_vulnerabilities: Some(1),
            name_query: Some("e".into()),
        };
        for view in TreeOrdering::ALL {
            let req = ViewRequest { filter: filter.clone(), expand_all: true, page: Some(1), page_size: Some(3), ..ViewRequest::new(view) };
            let resp = render_view(&s, &req).unwrap();
            assert!(resp.rows.iter().any(|r| r.meta.is_some() || r.children.iter().flatten().any(|c| c.meta.is_some())), "{view}");
            let via_value = serde_json::to_vec(&serde_json::to_value(&resp).unwrap()).unwrap();
            let direct = resp.to_canonical_json();
            assert_eq!(direct[..direct.len() - 1], via_value[..], "{view}");
            assert_eq!(direct.last(), Some(&b'\n'));
        }
    }

    #[test]
    fn identical_requests_give_identical_bytes() {
        let s = demo();
        let req = ViewRequest { expand_all: true, ..ViewRequest::new(TreeOrdering::BugCentered) };
        let a = render_view(&s, &req).unwrap().to_canonical_json();
        let b = render_view(&demo(), &req).unwrap().to_canonical_json();
        assert_eq!(a, b);
    }

    #[test]
    fn request_json_shape() {
        let req: ViewRequest = serde_json::from_str(
            r#"{"view": "libraryCentered", "filter": {"minCvss": 7.0, "hideUnscoredCves": true},
                "sort": {"key": "vulnerabilityCount", "direction": "asc"},
                "expand": [[{"kind": "library", "id": "abc"}]], "page": 2, "pageSize": 10}"#,
        )
        .unwrap();
        assert_eq!(req.view, TreeOrdering::LibraryCentered);
        assert_eq!(req.filter.min_cvss, Some(7.0));
        assert_eq!(req.expand[0][0], EntityRef::Library("abc".into()));
        assert!(serde_json::from_str::<ViewRequest>(r#"{"colour": 1}"#).is_err());
    }
}
