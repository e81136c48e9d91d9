use serde::{Deserialize, Serialize};

use super::{cells, AnalyticsError};
use crate::graph::{OrgGraph, RowNode, RowTree};
use crate::model::{CvssScore, EntityRef, Severity};

/// Table filter. Numeric bounds and the name query apply to the top-level
/// rows of the active view; the two hide toggles apply at every level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FilterSpec {
    pub hide_unscored_cves: bool,
    pub hide_vulnerability_free: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_cvss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_dependencies: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_vulnerabilities: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_cvss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_dependencies: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_vulnerabilities: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name_query: Option<String>,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        fn ordered<T: PartialOrd + std::fmt::Display>(name: &str, lo: Option<T>, hi: Option<T>) -> Result<(), AnalyticsError> {
            match (lo, hi) {
                (Some(lo), Some(hi)) if lo > hi => Err(AnalyticsError::InvalidFilter(format!("min{name} {lo} > max{name} {hi}"))),
                _ => Ok(()),
            }
        }
        ordered("Dependencies", self.min_dependencies, self.max_dependencies)?;
        ordered("Vulnerabilities", self.min_vulnerabilities, self.max_vulnerabilities)?;
        ordered("Cvss", self.min_cvss, self.max_cvss)?;
        for bound in [self.min_cvss, self.max_cvss].into_iter().flatten() {
            CvssScore::from_f64(bound).map_err(|e| AnalyticsError::InvalidFilter(e.to_string()))?;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        *self == FilterSpec::default()
    }
}

struct Bounds {
    name: Option<String>,
    deps: (usize, usize),
    vulns: (usize, usize),
    cvss: (u8, u8),
}

impl Bounds {
    fn new(f: &FilterSpec) -> Self {
        let tenths = |v: Option<f64>, default: u8| v.map_or(default, |v| CvssScore::from_f64(v).map_or(default, CvssScore::tenths));
        Self {
            name: f.name_query.as_ref().filter(|q| !q.is_empty()).map(|q| q.to_lowercase()),
            deps: (f.min_dependencies.unwrap_or(0), f.max_dependencies.unwrap_or(usize::MAX)),
            vulns: (f.min_vulnerabilities.unwrap_or(0), f.max_vulnerabilities.unwrap_or(usize::MAX)),
            cvss: (tenths(f.min_cvss, 0), tenths(f.max_cvss, 100)),
        }
    }

    fn admits(&self, g: &OrgGraph, entity: &EntityRef) -> Result<bool, AnalyticsError> {
        if let Some(q) = &self.name {
            let name = g.display_name(entity).unwrap_or_default().to_lowercase();
            if !name.contains(q.as_str()) {
                return Ok(false);
            }
        }
        let deps = cells::dependency_count(g, entity)?;
        let vulns = cells::vuln_count(g, entity)?;
        // rows without any scored CVE count as 0.0
        let max = g.max_score(entity).map_or(0, CvssScore::tenths);
        Ok((self.deps.0..=self.deps.1).contains(&deps)
            && (self.vulns.0..=self.vulns.1).contains(&vulns)
            && (self.cvss.0..=self.cvss.1).contains(&max))
    }
}

/// Applies a filter to a projected tree. Removing a row removes its subtree.
pub fn apply_filters(g: &OrgGraph, tree: &RowTree, f: &FilterSpec) -> Result<RowTree, AnalyticsError> {
    f.validate()?;
    if f.is_empty() {
        return Ok(tree.clone());
    }
    let bounds = Bounds::new(f);
    let mut rows = Vec::with_capacity(tree.rows.len());
    for row in &tree.rows {
        if !bounds.admits(g, &row.entity)? {
            continue;
        }
        if let Some(kept) = prune(g, row, f) {
            rows.push(kept);
        }
    }
    Ok(RowTree { ordering: tree.ordering, rows })
}

fn prune(g: &OrgGraph, node: &RowNode, f: &FilterSpec) -> Option<RowNode> {
    let hidden = match &node.entity {
        EntityRef::Repository(_) | EntityRef::Module(_) => {
            f.hide_vulnerability_free && g.vulns_of(&node.entity).map_or(true, |v| v.is_empty())
        }
        EntityRef::Vulnerability(c) => f.hide_unscored_cves && Severity::of(g.score(c)) == Severity::Unscored,
        EntityRef::Library(_) => false,
    };
    if hidden {
        return None;
    }
    Some(RowNode {
        entity: node.entity.clone(),
        children: node.children.iter().filter_map(|c| prune(g, c, f)).collect(),
    })
}
