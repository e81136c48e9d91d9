use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vulnex_core::testkit::{demo_organization, write_corpus};

fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn vulnex(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vulnex"));
    cmd.args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("VULNEX_") {
            cmd.env_remove(k);
        }
    }
    cmd.output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn demo_snapshot(dir: &Path) -> PathBuf {
    let corpus = dir.join("corpus");
    write_corpus(&corpus, &demo_organization()).unwrap();
    let graph = dir.join("graph.json");
    let out = vulnex(&["ingest", corpus.to_str().unwrap(), "--out", graph.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    graph
}

fn csv_rows(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect();
    (header, rows)
}

#[test]
fn ingest_valid_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.json");
    let corpus = core_fixtures().join("corpus");
    let out = vulnex(&["ingest", corpus.to_str().unwrap(), "--out", graph.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("read 3 file(s), loaded 3 repositories, rejected 0"));
    let snapshot = fs::read_to_string(&graph).unwrap();
    assert!(snapshot.contains("\"kind\": \"vulnex-snapshot\""));
}

#[test]
fn ingest_reports_rejections_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.json");
    let corpus = core_fixtures().join("corpus_malformed");
    let out = vulnex(&["ingest", corpus.to_str().unwrap(), "--out", graph.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("rejected: ") && stdout.contains("broken.vulnex.json"), "{stdout}");
    let report = vulnex(&["report", "--graph", graph.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(csv_rows(&report.stdout).1.len(), 3);
}

#[test]
fn empty_and_missing_directories() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let graph = dir.path().join("graph.json");
    let out = vulnex(&["ingest", empty.to_str().unwrap(), "--out", graph.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let report = vulnex(&["report", "--graph", graph.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(report.status.code(), Some(0));
    let (header, rows) = csv_rows(&report.stdout);
    assert_eq!(header, vulnex::report::CSV_COLUMNS);
    assert!(rows.is_empty());

    let missing = dir.path().join("missing");
    let out = vulnex(&["ingest", missing.to_str().unwrap(), "--out", graph.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("absent.json");
    assert_eq!(vulnex(&["report", "--graph", absent.to_str().unwrap()]).status.code(), Some(2));

    let graph = demo_snapshot(dir.path());
    let g = graph.to_str().unwrap();
    assert_eq!(vulnex(&["report", "--graph", g, "--view", "nope"]).status.code(), Some(1));
    assert_eq!(vulnex(&["report", "--graph", g, "--min-cvss", "high"]).status.code(), Some(1));
    assert_eq!(vulnex(&["report", "--graph", g, "--min-cvss", "9", "--max-cvss", "2"]).status.code(), Some(1));
    assert_eq!(vulnex(&["report", "--graph", g, "--min-cvss", "11"]).status.code(), Some(1));
    assert_eq!(vulnex(&["report", "--graph", g, "--columns", "not-a-cve"]).status.code(), Some(1));
    assert_eq!(vulnex(&["--help"]).status.code(), Some(0));
}

#[test]
fn critical_bug_report() {
    let dir = tempfile::tempdir().unwrap();
    let graph = demo_snapshot(dir.path());
    let out = vulnex(&["report", "--view", "bug", "--min-cvss", "9.0", "--format", "csv", "--graph", graph.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let (header, rows) = csv_rows(&out.stdout);
    assert_eq!(rows.len(), 8);
    let sev = header.iter().position(|h| h == "severity").unwrap();
    assert!(rows.iter().all(|r| r[sev] == "critical"));
    assert!(text(&out.stdout).ends_with('\n') && !text(&out.stdout).contains('\r'));
}

#[test]
fn most_severe_library_first() {
    let dir = tempfile::tempdir().unwrap();
    let graph = demo_snapshot(dir.path());
    let out = vulnex(&["report", "--view", "lib", "--sort", "most-severe", "--format", "csv", "--graph", graph.to_str().unwrap()]);
    let (header, rows) = csv_rows(&out.stdout);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let first = &rows[0];
    assert!(first[col("name")].contains("activemq-all"), "{first:?}");
    assert_eq!(
        [&first[col("low")], &first[col("medium")], &first[col("high")], &first[col("critical")]],
        ["1", "14", "3", "2"]
    );
    assert_eq!(first[col("dependency_count")], "20");
    assert_eq!(first[col("max_cvss")], "9.8");
}

#[test]
fn csv_and_json_carry_the_same_rows() {
    let dir = tempfile::tempdir().unwrap();
    let graph = demo_snapshot(dir.path());
    let g = graph.to_str().unwrap();
    for view in ["repo", "lib", "bug"] {
        let args = ["report", "--view", view, "--graph", g, "--expand-all", "--hide-unscored", "--max-vulns", "30"];
        let json: serde_json::Value = serde_json::from_slice(&vulnex(&[&args[..], &["--format", "json"]].concat()).stdout).unwrap();
        let (header, rows) = csv_rows(&vulnex(&[&args[..], &["--format", "csv"]].concat()).stdout);
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();

        let mut flat = Vec::new();
        fn walk(row: &serde_json::Value, depth: usize, out: &mut Vec<(usize, serde_json::Value)>) {
            out.push((depth, row.clone()));
            for c in row["children"].as_array().into_iter().flatten() {
                walk(c, depth + 1, out);
            }
        }
        for row in json["rows"].as_array().unwrap() {
            walk(row, 0, &mut flat);
        }
        assert_eq!(flat.len(), rows.len(), "{view}");
        for ((depth, j), c) in flat.iter().zip(&rows) {
            assert_eq!(c[col("depth")], depth.to_string());
            assert_eq!(c[col("id")], j["entity"]["id"].as_str().unwrap());
            assert_eq!(c[col("kind")], j["entity"]["kind"].as_str().unwrap());
            assert_eq!(c[col("name")], j["name"].as_str().unwrap());
            assert_eq!(c[col("vuln_count")], j["vulnCount"].to_string());
            assert_eq!(c[col("link_count")], j["linkCount"].to_string());
            assert_eq!(c[col("critical")], j["histogram"]["critical"].to_string());
            let max = j.get("maxCvss").map(|v| format!("{:.1}", v.as_f64().unwrap())).unwrap_or_default();
            assert_eq!(c[col("max_cvss")], max);
            let present = c[col("matrix")].split(';').filter(|s| s.ends_with("=1")).count();
            assert_eq!(present, j["matrix"].as_array().unwrap().iter().filter(|b| b.as_bool().unwrap()).count());
        }
    }
}

#[test]
fn flags_can_come_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let graph = demo_snapshot(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_vulnex"))
        .args(["report"])
        .env("VULNEX_GRAPH", &graph)
        .env("VULNEX_VIEW", "bug")
        .env("VULNEX_MIN_CVSS", "9.0")
        .env("VULNEX_FORMAT", "csv")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(csv_rows(&out.stdout).1.len(), 8);
}

#[test]
fn pseudonymized_ingest_writes_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = core_fixtures().join("corpus");
    let graph = dir.path().join("graph.json");
    let mapping = dir.path().join("mapping.tsv");
    let args = ["ingest", corpus.to_str().unwrap(), "--out", graph.to_str().unwrap(), "--pseudonymize", "--seed", "7", "--mapping-out", mapping.to_str().unwrap()];
    assert_eq!(vulnex(&args).status.code(), Some(0));
    let table = fs::read_to_string(&mapping).unwrap();
    assert!(table.contains("Eclipse Hono\t"), "{table}");
    let snapshot = fs::read_to_string(&graph).unwrap();
    assert!(!snapshot.contains("Eclipse Hono"));
    let first = fs::read(&graph).unwrap();
    assert_eq!(vulnex(&args).status.code(), Some(0));
    assert_eq!(fs::read(&graph).unwrap(), first, "same seed, same output");
}

#[test]
fn report_applies_metadata_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.json");
    let corpus = core_fixtures().join("corpus");
    vulnex(&["ingest", corpus.to_str().unwrap(), "--out", graph.to_str().unwrap()]);
    let fixtures = core_fixtures().join("meta/quality.json");
    let out = vulnex(&["report", "--graph", graph.to_str().unwrap(), "--format", "csv", "--meta-fixtures", fixtures.to_str().unwrap()]);
    let (header, rows) = csv_rows(&out.stdout);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let hono = rows.iter().find(|r| r[col("id")] == "hono").unwrap();
    assert_eq!((hono[col("lgtm_grade")].as_str(), hono[col("github_stars")].as_str()), ("A+", "999"));
    assert_eq!(hono[col("github_issues")], "", "absent stays empty");
    let jkube = rows.iter().find(|r| r[col("id")] == "jkube").unwrap();
    assert_eq!(jkube[col("lgtm_grade")], "");

    let enriched = dir.path().join("enriched.json");
    let out = vulnex(&["enrich", "--graph", graph.to_str().unwrap(), "--out", enriched.to_str().unwrap(), "--meta-fixtures", fixtures.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(fs::read_to_string(&enriched).unwrap().contains("\"githubStars\": 999"));
}

#[test]
fn convert_steady_report() {
    let dir = core_fixtures().join("steady");
    let out = vulnex(&["convert", dir.join("steady-report.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(text(&out.stdout), fs::read_to_string(dir.join("steady-report.expected.vulnex.json")).unwrap());
    let bad = vulnex(&["convert", dir.join("steady-report.json").to_str().unwrap(), "--adapter", "unknown"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn serve_fails_when_port_taken() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let out = vulnex(&["serve", "--port", &port]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));

    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("absent.json");
    assert_eq!(vulnex(&["serve", "--port", "0", "--graph", absent.to_str().unwrap()]).status.code(), Some(2));
}
