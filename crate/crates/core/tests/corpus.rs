use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use vulnex_core::graph::{build_graph, project_tree, TreeOrdering};
use vulnex_core::ingest::{adapt_external, canonicalize, ingest_directory, parse_scan_file, STEADY_ADAPTER_ID};
use vulnex_core::model::{CveId, EntityRef};
use vulnex_core::snapshot::{parse_snapshot, snapshot_bytes};
use vulnex_core::testkit::oracle;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn valid_corpus_ingests_cleanly() {
    let (docs, report) = ingest_directory(&fixtures().join("corpus")).unwrap();
    assert!(report.is_clean(), "{report:?}");
    assert!(report.warnings.is_empty(), "{report:?}");
    assert_eq!((report.files_read, report.repositories_loaded), (3, 3));
    let ids: Vec<_> = docs.iter().map(|d| d.repository.id.as_str()).collect();
    assert_eq!(ids, ["hono", "jkube", "steady"]);
}

#[test]
fn corpus_graph_matches_hand_count() {
    let (docs, _) = ingest_directory(&fixtures().join("corpus")).unwrap();
    let g = build_graph(&docs).unwrap();
    // counted by hand from the three fixture files
    assert_eq!(g.repositories().count(), 3);
    assert_eq!(g.modules().count(), 6);
    assert_eq!(g.libraries().count(), 6);
    assert_eq!(g.vulnerabilities().count(), 5);
    assert_eq!(g.exposure_quadruples().len(), 7);

    let mqtt = g
        .exposure_quadruples()
        .into_iter()
        .find(|q| q.cve_id.as_str() == "CVE-2019-16869")
        .unwrap();
    assert_eq!(mqtt.module_path.iter().map(|m| m.as_str()).collect::<Vec<_>>(), ["hono/adapters", "hono/adapters/mqtt"]);

    let reach: BTreeSet<&str> = g.repos_affected_by(&CveId::new("CVE-2018-7489")).unwrap().iter().map(|r| r.as_str()).collect();
    assert_eq!(reach, BTreeSet::from(["hono", "steady"]));
    assert!(g.vulns_of(&EntityRef::Repository("jkube".into())).unwrap().is_empty());
    assert_eq!(g.score(&CveId::new("CVE-2015-7501")), None);

    let hono = g.repository("hono").unwrap();
    assert_eq!(hono.source_url.as_deref(), Some("https://github.com/eclipse/hono"));

    let quads: BTreeSet<oracle::Quad> = g
        .exposure_quadruples()
        .into_iter()
        .map(|q| {
            (
                q.repository_id.as_str().to_owned(),
                q.module_path.iter().map(|m| m.as_str().to_owned()).collect(),
                q.library_digest.as_str().to_owned(),
                q.cve_id.as_str().to_owned(),
            )
        })
        .collect();
    assert_eq!(quads, oracle::quadruples(&docs));
}

#[test]
fn views_of_corpus_agree() {
    let (docs, _) = ingest_directory(&fixtures().join("corpus")).unwrap();
    let g = build_graph(&docs).unwrap();
    let expected = g.exposure_quadruples();
    for ordering in TreeOrdering::ALL {
        assert_eq!(project_tree(&g, ordering).quadruples(&g), expected, "{ordering}");
    }
    let repo_tree = project_tree(&g, TreeOrdering::RepositoryCentered);
    assert_eq!(repo_tree.rows.len(), 3, "clean repositories stay listed");
}

#[test]
fn malformed_file_is_rejected_alone() {
    let (docs, report) = ingest_directory(&fixtures().join("corpus_malformed")).unwrap();
    assert_eq!(report.files_read, 4);
    assert_eq!(docs.len(), 3);
    assert_eq!(report.rejected.len(), 1);
    let rejected = &report.rejected[0];
    assert_eq!(rejected.file.file_name().unwrap(), "broken.vulnex.json");
    assert!(rejected.message.contains("line 5"), "{}", rejected.message);
}

#[test]
fn golden_canonical_form() {
    let dir = fixtures().join("golden");
    let input = fs::read(dir.join("minimal.vulnex.json")).unwrap();
    let golden = fs::read(dir.join("minimal.canonical.json")).unwrap();
    let canonical = canonicalize(&parse_scan_file(&input).unwrap().document);
    assert_eq!(String::from_utf8(canonical.clone()).unwrap(), String::from_utf8(golden).unwrap());
    let again = canonicalize(&parse_scan_file(&canonical).unwrap().document);
    assert_eq!(again, canonical);
}

#[test]
fn canonicalization_is_idempotent_on_corpus() {
    for entry in fs::read_dir(fixtures().join("corpus")).unwrap() {
        let path = entry.unwrap().path();
        let once = canonicalize(&parse_scan_file(&fs::read(&path).unwrap()).unwrap().document);
        let twice = canonicalize(&parse_scan_file(&once).unwrap().document);
        assert_eq!(once, twice, "{}", path.display());
    }
}

#[test]
fn build_is_permutation_invariant_on_corpus() {
    let (docs, _) = ingest_directory(&fixtures().join("corpus")).unwrap();
    let reference = snapshot_bytes(&build_graph(&docs).unwrap());
    let orders: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for order in orders {
        let permuted: Vec<_> = order.iter().map(|&i| docs[i].clone()).collect();
        assert_eq!(snapshot_bytes(&build_graph(&permuted).unwrap()), reference, "{order:?}");
    }
    assert_eq!(snapshot_bytes(&parse_snapshot(&reference).unwrap()), reference);
}

#[test]
fn steady_adapter_golden() {
    let dir = fixtures().join("steady");
    let doc = adapt_external(STEADY_ADAPTER_ID, &fs::read(dir.join("steady-report.json")).unwrap()).unwrap();
    let expected = fs::read_to_string(dir.join("steady-report.expected.vulnex.json")).unwrap();
    assert_eq!(String::from_utf8(canonicalize(&doc)).unwrap(), expected);
    assert_eq!(parse_scan_file(expected.as_bytes()).unwrap().document, doc);
}

#[test]
fn unreadable_directory_is_an_error() {
    assert!(ingest_directory(&fixtures().join("does-not-exist")).is_err());
}
