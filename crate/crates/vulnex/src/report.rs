//! CSV rendering of a view response.
//!
//! One record per returned row, in display order (parents before children).
//! Columns:
//!
//! | column | content |
//! |---|---|
//! | `depth` | 0 for top-level rows |
//! | `path` | `kind:id` of every ancestor and the row itself, joined by ` > ` |
//! | `kind`, `id`, `name` | the row entity |
//! | `link_count`, `vuln_count`, `dependency_count` | counts |
//! | `max_cvss` | highest score in the subtree, one decimal; empty when none |
//! | `severity` | bucket of `max_cvss` |
//! | `low`, `medium`, `high`, `critical`, `unscored` | distinct CVEs per bucket |
//! | `score_strip` | `CVE=score` pairs ascending, `;`-separated |
//! | `matrix` | `CVE=1` or `CVE=0` per matrix column, `;`-separated |
//! | `lgtm_grade`, `lgtm_score`, `github_issues`, `github_stars`, `github_watchers` | metadata; empty when absent |

use vulnex_core::model::EntityRef;
use vulnex_core::view::{ViewResponse, ViewRow};

pub const CSV_COLUMNS: [&str; 22] = [
    "depth",
    "path",
    "kind",
    "id",
    "name",
    "link_count",
    "vuln_count",
    "dependency_count",
    "max_cvss",
    "severity",
    "low",
    "medium",
    "high",
    "critical",
    "unscored",
    "score_strip",
    "matrix",
    "lgtm_grade",
    "lgtm_score",
    "github_issues",
    "github_stars",
    "github_watchers",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn record(resp: &ViewResponse, path: &[&EntityRef], row: &ViewRow) -> Vec<String> {
    let meta = row.meta.clone().unwrap_or_default();
    let grade = meta.lgtm_grade.map(|g| serde_json::to_value(g).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default());
    let strip = row.score_strip.entries.iter().map(|e| format!("{}={}", e.cve_id, e.cvss_score)).collect::<Vec<_>>();
    let matrix = resp
        .matrix_columns
        .iter()
        .zip(&row.matrix)
        .map(|(c, present)| format!("{c}={}", u8::from(*present)))
        .collect::<Vec<_>>();
    let h = row.histogram;
    vec![
        (path.len() - 1).to_string(),
        path.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" > "),
        row.entity.kind().as_str().to_owned(),
        row.entity.id().to_owned(),
        row.name.clone(),
        row.link_count.to_string(),
        row.vuln_count.to_string(),
        row.dependency_count.to_string(),
        opt(row.max_cvss),
        row.severity.as_str().to_owned(),
        h.low.to_string(),
        h.medium.to_string(),
        h.high.to_string(),
        h.critical.to_string(),
        h.unscored.to_string(),
        strip.join(";"),
        matrix.join(";"),
        grade.unwrap_or_default(),
        opt(meta.lgtm_score),
        opt(meta.github_issues),
        opt(meta.github_stars),
        opt(meta.github_watchers),
    ]
}

/// RFC 4180 CSV with a header row and LF line endings.
pub fn to_csv(resp: &ViewResponse) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    resp.walk_rows(|path, row| w.write_record(record(resp, path, row)).expect("in-memory write"));
    w.into_inner().expect("in-memory flush")
}
