use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use vulnex_core::enrich::{
    enrich_graph, fixture_provider, CodeHostProvider, MetaCache, MetaKey, MetaProvider, RecordedTransport, DEFAULT_TTL,
};
use vulnex_core::graph::{build_graph, OrgGraph};
use vulnex_core::ingest::ingest_directory;
use vulnex_core::model::{Grade, QualityMeta};

const ENDPOINT: &str = "https://api.codehost.test";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn corpus() -> OrgGraph {
    build_graph(&ingest_directory(&fixtures().join("corpus")).unwrap().0).unwrap()
}

fn at(s: &str) -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
}

fn code_host(cache: MetaCache) -> CodeHostProvider<RecordedTransport> {
    let transport = RecordedTransport::load(&fixtures().join("http/codehost.json")).unwrap();
    CodeHostProvider::new(ENDPOINT, Some("test-token".into()), transport, cache).with_clock(|| at("2020-02-04T12:00:00Z"))
}

#[test]
fn recorded_responses_fill_repository_meta() {
    let g = corpus();
    let host = code_host(MetaCache::in_memory());
    let e = enrich_graph(&g, &[&host]);
    let hono = e.repository("hono").unwrap().meta.clone().unwrap();
    assert_eq!((hono.github_stars, hono.github_issues, hono.github_watchers), (Some(120), Some(96), Some(41)));
    assert_eq!(hono.lgtm_grade, None);
    // rate limited without a cached answer: nothing is known
    assert_eq!(e.repository("steady").unwrap().meta, None);
    // no source URL, never asked
    assert_eq!(e.repository("jkube").unwrap().meta, None);
    assert_eq!(host.transport().calls(), 2);
    assert_eq!(e.exposure_quadruples(), g.exposure_quadruples());
}

#[test]
fn fixture_file_takes_precedence_per_field() {
    let g = corpus();
    let fixture = fixture_provider(&fixtures().join("meta/quality.json")).unwrap();
    let host = code_host(MetaCache::in_memory());
    let e = enrich_graph(&g, &[&fixture, &host]);
    let hono = e.repository("hono").unwrap().meta.clone().unwrap();
    assert_eq!(hono.lgtm_grade, Some(Grade::APlus));
    assert_eq!(hono.github_stars, Some(999));
    assert_eq!(hono.github_issues, Some(96));
    let jackson = e.library("1b7d04c3aa").unwrap().meta.clone().unwrap();
    assert_eq!((jackson.lgtm_grade, jackson.lgtm_score), (Some(Grade::A), Some(4.61)));
    assert_eq!(e.library("77e0d3f1c4").unwrap().meta, None);
    assert_eq!(e.exposure_quadruples(), g.exposure_quadruples());
    assert_eq!(enrich_graph(&e, &[&fixture, &host]), e);
}

#[test]
fn warm_cache_survives_rate_limit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meta-cache.json");
    let cache = MetaCache::open(&path).unwrap();
    let cached = QualityMeta { github_stars: Some(77), github_watchers: Some(9), ..Default::default() };
    cache.put("https://github.com/eclipse/steady", cached.clone(), at("2020-01-01T00:00:00Z"), DEFAULT_TTL).unwrap();

    let host = code_host(MetaCache::open(&path).unwrap());
    let key = MetaKey::Repository { source_url: "https://github.com/eclipse/steady".into() };
    assert_eq!(host.lookup(&key).unwrap(), Some(cached));

    // fresh answers are written back to the cache file
    host.lookup(&MetaKey::Repository { source_url: "https://github.com/eclipse/hono".into() }).unwrap();
    let reloaded = MetaCache::open(&path).unwrap();
    let entry = reloaded.get("https://github.com/eclipse/hono").unwrap();
    assert_eq!(entry.meta.github_stars, Some(120));
    assert_eq!(entry.ttl_seconds, 86_400);
    assert_eq!(entry.fetched_at, at("2020-02-04T12:00:00Z"));
}

#[test]
fn fresh_cache_avoids_requests() {
    let cache = MetaCache::in_memory();
    cache
        .put("https://github.com/eclipse/hono", QualityMeta { github_stars: Some(1), ..Default::default() }, at("2020-02-04T11:00:00Z"), Duration::from_secs(7200))
        .unwrap();
    let host = code_host(cache);
    let key = MetaKey::Repository { source_url: "https://github.com/eclipse/hono".into() };
    assert_eq!(host.lookup(&key).unwrap().unwrap().github_stars, Some(1));
    assert_eq!(host.transport().calls(), 0);
}
