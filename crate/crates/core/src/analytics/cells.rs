use std::cmp::Reverse;
use std::collections::BTreeSet;

use serde::Serialize;

use super::AnalyticsError;
use crate::graph::{OrgGraph, RowNode};
use crate::model::{CveId, CvssScore, Digest, EntityRef, ModuleId, Severity};

/// Distinct CVEs of a row's subtree per severity bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SeverityHistogram {
    pub critical: usize,
    pub high: usize,
    pub low: usize,
    pub medium: usize,
    pub unscored: usize,
}

impl SeverityHistogram {
    pub fn add(&mut self, severity: Severity) {
        match severity {
            Severity::Unscored => self.unscored += 1,
            Severity::Low => self.low += 1,
            Severity::Medium => self.medium += 1,
            Severity::High => self.high += 1,
            Severity::Critical => self.critical += 1,
        }
    }

    pub fn get(&self, severity: Severity) -> usize {
        match severity {
            Severity::Unscored => self.unscored,
            Severity::Low => self.low,
            Severity::Medium => self.medium,
            Severity::High => self.high,
            Severity::Critical => self.critical,
        }
    }

    pub fn scored(&self) -> usize {
        self.low + self.medium + self.high + self.critical
    }

    pub fn total(&self) -> usize {
        self.scored() + self.unscored
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StripEntry {
    pub cve_id: CveId,
    pub cvss_score: CvssScore,
}

/// Every scored CVE of a subtree with its precise score, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ScoreStrip {
    pub entries: Vec<StripEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<CvssScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<CvssScore>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CveMatrix {
    pub columns: Vec<CveId>,
    /// One presence vector per requested row, in column order.
    pub cells: Vec<Vec<bool>>,
}

pub fn severity_histogram(g: &OrgGraph, entity: &EntityRef) -> Result<SeverityHistogram, AnalyticsError> {
    let mut h = SeverityHistogram::default();
    for cve in g.vulns_of(entity)?.iter() {
        h.add(Severity::of(g.score(cve)));
    }
    Ok(h)
}

/// Entries exclude CVEs without a score; a 0.0 score is kept since it is a
/// precise value.
pub fn score_strip(g: &OrgGraph, entity: &EntityRef) -> Result<ScoreStrip, AnalyticsError> {
    let mut entries: Vec<StripEntry> = g
        .vulns_of(entity)?
        .iter()
        .filter_map(|c| g.score(c).map(|s| StripEntry { cve_id: c.clone(), cvss_score: s }))
        .collect();
    entries.sort_by(|a, b| a.cvss_score.cmp(&b.cvss_score).then_with(|| a.cve_id.cmp(&b.cve_id)));
    Ok(ScoreStrip {
        min: entries.first().map(|e| e.cvss_score),
        max: entries.last().map(|e| e.cvss_score),
        entries,
    })
}

pub fn vuln_count(g: &OrgGraph, entity: &EntityRef) -> Result<usize, AnalyticsError> {
    Ok(g.vulns_of(entity)?.len())
}

/// Number of entities on the next level of the row's tree.
pub fn link_count(row: &RowNode) -> usize {
    row.link_count()
}

/// Dependency count used by the dependency filter bounds.
///
/// Repository/module: distinct libraries used (a module includes its
/// sub-modules). Library: distinct repositories depending on it. CVE:
/// distinct libraries it affects.
pub fn dependency_count(g: &OrgGraph, entity: &EntityRef) -> Result<usize, AnalyticsError> {
    if !g.contains(entity) {
        return Err(crate::graph::GraphError::UnknownEntity(entity.clone()).into());
    }
    Ok(match entity {
        EntityRef::Repository(id) => g.repository_libraries(id).len(),
        EntityRef::Module(id) => {
            let mut libs = BTreeSet::new();
            collect_module_libraries(g, id, &mut libs);
            libs.len()
        }
        EntityRef::Library(id) => g.library_repositories(id).len(),
        EntityRef::Vulnerability(id) => g.cve_libraries(id).len(),
    })
}

fn collect_module_libraries<'g>(g: &'g OrgGraph, module: &ModuleId, into: &mut BTreeSet<&'g Digest>) {
    into.extend(g.module_libraries(module));
    for child in g.child_modules(module) {
        collect_module_libraries(g, child, into);
    }
}

/// The `k` CVEs reaching the most repositories; ties go to the higher score
/// (unscored last), then to the smaller CVE id.
pub fn default_matrix_columns(g: &OrgGraph, k: usize) -> Result<Vec<CveId>, AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::InvalidColumnCount);
    }
    let mut ranked: Vec<(Reverse<usize>, Reverse<i16>, &CveId)> = g
        .vulnerabilities()
        .map(|v| {
            let reach = g.repos_affected_by(&v.cve_id).map_or(0, |r| r.len());
            let score = v.cvss_score.map_or(-1, |s| i16::from(s.tenths()));
            (Reverse(reach), Reverse(score), &v.cve_id)
        })
        .collect();
    ranked.sort();
    Ok(ranked.into_iter().take(k).map(|(_, _, c)| c.clone()).collect())
}

pub const DEFAULT_MATRIX_COLUMNS: usize = 5;

/// Presence of each column CVE in each row's subtree. Column order is kept.
pub fn cve_matrix(g: &OrgGraph, rows: &[EntityRef], columns: &[CveId]) -> Result<CveMatrix, AnalyticsError> {
    if let Some(unknown) = columns.iter().find(|c| g.vulnerability(c.as_str()).is_none()) {
        return Err(AnalyticsError::UnknownColumn(unknown.clone()));
    }
    let cells = rows
        .iter()
        .map(|row| {
            let vulns = g.vulns_of(row)?;
            Ok(columns.iter().map(|c| vulns.contains(c)).collect())
        })
        .collect::<Result<Vec<_>, AnalyticsError>>()?;
    Ok(CveMatrix { columns: columns.to_vec(), cells })
}
