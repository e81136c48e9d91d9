//! Synthetic scan corpora: a fluent document builder, seeded random
//! organizations for property checks, the demo organization and
//! the large-scale benchmark corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::pseudonym_words;
use crate::ingest::{canonicalize, AffectsDecl, ModuleDecl, ScanDocument, FILE_EXTENSION, FORMAT_VERSION};
use crate::model::{Coordinates, CveId, CvssScore, DependsEdge, Digest, Library, Repository, Vulnerability};

const TIMESTAMP: &str = "2020-01-21T09:00:00Z";

/// Fluent builder for a single-repository scan document.
#[derive(Debug, Clone)]
pub struct DocBuilder {
    doc: ScanDocument,
}

impl DocBuilder {
    pub fn new(repo_id: &str) -> Self {
        Self {
            doc: ScanDocument {
                format_version: FORMAT_VERSION.to_owned(),
                scan_timestamp: TIMESTAMP.to_owned(),
                repository: Repository { id: repo_id.into(), name: repo_id.to_owned(), source_url: None, meta: None },
                modules: Vec::new(),
                libraries: Vec::new(),
                vulnerabilities: Vec::new(),
                dependencies: Vec::new(),
                affects: Vec::new(),
            },
        }
    }

    pub fn name(mut self, name: &str) -> Self {
        self.doc.repository.name = name.to_owned();
        self
    }

    pub fn source_url(mut self, url: &str) -> Self {
        self.doc.repository.source_url = Some(url.to_owned());
        self
    }

    pub fn module(self, id: &str, parent: Option<&str>) -> Self {
        self.named_module(id, id, parent)
    }

    pub fn named_module(mut self, id: &str, name: &str, parent: Option<&str>) -> Self {
        self.doc.modules.push(ModuleDecl { id: id.into(), name: name.to_owned(), parent_id: parent.map(Into::into) });
        self
    }

    pub fn library(mut self, digest: &str, group: &str, artifact: &str, version: &str) -> Self {
        if !self.doc.libraries.iter().any(|l| l.digest.as_str() == digest) {
            self.doc.libraries.push(Library {
                digest: digest.into(),
                coordinates: Coordinates { group: group.into(), artifact: artifact.into(), version: version.into() },
                meta: None,
            });
        }
        self
    }

    pub fn depends(mut self, module: &str, digest: &str) -> Self {
        self.doc.dependencies.push(DependsEdge { module_id: module.into(), library_digest: digest.into() });
        self
    }

    pub fn cve(mut self, id: &str, score: Option<f64>) -> Self {
        if !self.doc.vulnerabilities.iter().any(|v| v.cve_id.as_str() == id) {
            self.doc.vulnerabilities.push(Vulnerability {
                cve_id: id.into(),
                cvss_score: score.map(|s| CvssScore::from_f64(s).expect("fixture score in range")),
                cvss_vector: None,
                description: None,
            });
        }
        self
    }

    pub fn affects(mut self, digest: &str, cve: &str) -> Self {
        self.doc.affects.push(AffectsDecl { library_digest: digest.into(), cve_id: cve.into(), reachable: None });
        self
    }

    /// Validates and normalizes. Panics on an invalid fixture.
    pub fn build(mut self) -> ScanDocument {
        self.doc.validate().expect("fixture document is valid");
        self.doc.normalize();
        self.doc
    }
}

/// Bounds for [`random_organization`].
#[derive(Debug, Clone, Copy)]
pub struct RandomShape {
    pub max_repositories: usize,
    pub max_modules_per_repository: usize,
    pub max_libraries: usize,
    pub max_cves: usize,
}

impl Default for RandomShape {
    fn default() -> Self {
        Self { max_repositories: 20, max_modules_per_repository: 4, max_libraries: 15, max_cves: 30 }
    }
}

/// Global relation used to emit consistent per-repository documents.
struct Organization {
    libraries: BTreeMap<Digest, Coordinates>,
    cves: BTreeMap<CveId, Option<CvssScore>>,
    affects: BTreeMap<Digest, BTreeSet<CveId>>,
}

impl Organization {
    fn document(&self, repo: Repository, modules: Vec<ModuleDecl>, deps: Vec<DependsEdge>) -> ScanDocument {
        let used: BTreeSet<&Digest> = deps.iter().map(|d| &d.library_digest).collect();
        let mut cves = BTreeSet::new();
        let mut affects = Vec::new();
        for lib in &used {
            for cve in self.affects.get(*lib).into_iter().flatten() {
                cves.insert(cve);
                affects.push(AffectsDecl { library_digest: (*lib).clone(), cve_id: cve.clone(), reachable: None });
            }
        }
        let mut doc = ScanDocument {
            format_version: FORMAT_VERSION.to_owned(),
            scan_timestamp: TIMESTAMP.to_owned(),
            repository: repo,
            modules,
            libraries: used
                .iter()
                .map(|d| Library { digest: (*d).clone(), coordinates: self.libraries[*d].clone(), meta: None })
                .collect(),
            vulnerabilities: cves
                .into_iter()
                .map(|c| Vulnerability { cve_id: c.clone(), cvss_score: self.cves[c], cvss_vector: None, description: None })
                .collect(),
            dependencies: deps,
            affects,
        };
        doc.normalize();
        doc
    }
}

fn random_score(rng: &mut ChaCha8Rng) -> Option<CvssScore> {
    match rng.gen_range(0..10) {
        0 => None,
        1 => Some(CvssScore::from_tenths(0).unwrap()),
        _ => Some(CvssScore::from_tenths(rng.gen_range(1..=100)).unwrap()),
    }
}

/// Seeded random organization within `shape`. Includes nested modules,
/// clean repositories, unscored and zero-scored CVEs, and unused libraries.
pub fn random_organization(seed: u64, shape: RandomShape) -> Vec<ScanDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_libs = rng.gen_range(1..=shape.max_libraries);
    let n_cves = rng.gen_range(1..=shape.max_cves);
    let n_repos = rng.gen_range(1..=shape.max_repositories);

    let libraries: BTreeMap<Digest, Coordinates> = (0..n_libs)
        .map(|i| {
            let coords = Coordinates {
                group: "org.example".into(),
                artifact: format!("lib{i:02}"),
                version: format!("1.{}", i % 3),
            };
            (Digest::new(format!("sha1-{i:04x}")), coords)
        })
        .collect();
    let cves: BTreeMap<CveId, Option<CvssScore>> = (0..n_cves)
        .map(|i| (CveId::new(format!("CVE-20{:02}-{:04}", 10 + i % 12, 1000 + i)), random_score(&mut rng)))
        .collect();
    let lib_ids: Vec<&Digest> = libraries.keys().collect();
    let cve_ids: Vec<&CveId> = cves.keys().collect();
    let mut affects: BTreeMap<Digest, BTreeSet<CveId>> = BTreeMap::new();
    for cve in &cve_ids {
        // some CVEs hit several libraries, a few none at all
        for _ in 0..rng.gen_range(0..=2) {
            let lib = lib_ids.choose(&mut rng).unwrap();
            affects.entry((*lib).clone()).or_default().insert((*cve).clone());
        }
    }
    let org = Organization { libraries: libraries.clone(), cves, affects };

    (0..n_repos)
        .map(|r| {
            let repo_id = format!("repo{r:02}");
            let repo = Repository { id: repo_id.as_str().into(), name: format!("name-{}", (r * 7) % 23), source_url: None, meta: None };
            let n_modules = rng.gen_range(1..=shape.max_modules_per_repository);
            let mut modules = Vec::new();
            let mut deps = Vec::new();
            for m in 0..n_modules {
                let id = format!("{repo_id}-m{m}");
                let parent = (m > 0 && rng.gen_bool(0.5)).then(|| format!("{repo_id}-m{}", rng.gen_range(0..m)));
                modules.push(ModuleDecl { id: id.as_str().into(), name: format!("mod{}", m), parent_id: parent.map(Into::into) });
                for _ in 0..rng.gen_range(0..=3) {
                    let lib = lib_ids.choose(&mut rng).unwrap();
                    deps.push(DependsEdge { module_id: id.as_str().into(), library_digest: (*lib).clone() });
                }
            }
            org.document(repo, modules, deps)
        })
        .collect()
}

/// `adjective-animal` name for index `k`, walking the word lists diagonally.
pub fn demo_name(k: usize) -> String {
    let (adjectives, animals) = pseudonym_words();
    format!("{}-{}", adjectives[(k * 7 + 3) % adjectives.len()], animals[(k * 11 + 5) % animals.len()])
}

/// Library rows of the demo organization: (digest, group, artifact, version,
/// cves as (id, score), repositories reached as a half-open index range).
struct DemoLibrary {
    digest: &'static str,
    group: &'static str,
    artifact: &'static str,
    version: &'static str,
    cves: Vec<(String, Option<f64>)>,
    repos: Vec<usize>,
}

pub const DEMO_REPOSITORIES: usize = 295;

/// The demo organization used by the use-case scenarios: 295 repositories;
/// `activemq-all` carries 1 low, 14 medium, 3 high and 2 critical CVEs and
/// reaches 20 repositories; eight critical CVEs exist overall; repository
/// `low-marmoset` has all three of its critical bugs in module
/// `satisfactory-haddock`.
pub fn demo_organization() -> Vec<ScanDocument> {
    let range = |a: usize, b: usize| (a..b).collect::<Vec<_>>();
    let mut activemq_cves = vec![("CVE-2018-1270".to_owned(), Some(9.8)), ("CVE-2015-5254".to_owned(), Some(9.8))];
    for (i, score) in [7.5, 8.1, 7.2].iter().enumerate() {
        activemq_cves.push((format!("CVE-2016-{:04}", 3088 + i), Some(*score)));
    }
    for i in 0..14 {
        activemq_cves.push((format!("CVE-2017-{:04}", 1500 + i), Some(4.0 + (i % 30) as f64 / 10.0 * 2.0)));
    }
    activemq_cves.push(("CVE-2014-3600".to_owned(), Some(3.5)));

    let libraries = vec![
        DemoLibrary {
            digest: "3f1a7c0d9e2b4a6f8c1d3e5f7a9b0c2d4e6f8a1b",
            group: "org.apache.activemq",
            artifact: "activemq-all",
            version: "5.14.3",
            cves: activemq_cves,
            repos: range(0, 20),
        },
        DemoLibrary {
            digest: "5b2c8d1e0f3a5b7c9d2e4f6a8b0c1d3e5f7a9b2c",
            group: "org.apache.servicemix.bundles",
            artifact: "org.apache.lucene.queryparser",
            version: "6.4.0",
            cves: vec![("CVE-2017-12629".into(), Some(9.8))],
            repos: range(20, 34),
        },
        DemoLibrary {
            digest: "6c3d9e2f1a4b6c8d0e3f5a7b9c1d2e4f6a8b0c3d",
            group: "org.springframework.data",
            artifact: "spring-data-commons",
            version: "1.13.10",
            cves: vec![("CVE-2018-1273".into(), Some(9.8)), ("CVE-2018-1274".into(), Some(7.5))],
            repos: range(34, 41),
        },
        DemoLibrary {
            digest: "7d4e0f3a2b5c7d9e1f4a6b8c0d2e3f5a7b9c1d4e",
            group: "org.jgroups",
            artifact: "jgroups",
            version: "3.6.7",
            cves: vec![("CVE-2016-2141".into(), Some(9.8))],
            repos: range(41, 46),
        },
        DemoLibrary {
            digest: "8e5f1a4b3c6d8e0f2a5b7c9d1e3f4a6b8c0d2e5f",
            group: "org.codehaus.groovy",
            artifact: "groovy-all",
            version: "2.4.3",
            cves: vec![("CVE-2015-3253".into(), Some(9.8)), ("CVE-2016-6814".into(), Some(9.8))],
            repos: range(46, 53),
        },
        DemoLibrary {
            digest: "9f6a2b5c4d7e9f1a3b6c8d0e2f4a5b7c9d1e3f6a",
            group: "org.apache.tomcat.embed",
            artifact: "tomcat-embed-core",
            version: "8.5.29",
            cves: vec![("CVE-2018-8014".into(), Some(9.8)), ("CVE-2018-8034".into(), Some(7.5))],
            repos: std::iter::once(0).chain(53..60).collect(),
        },
        DemoLibrary {
            digest: "a07b3c6d5e8f0a2b4c7d9e1f3a5b6c8d0e2f4a7b",
            group: "xerces",
            artifact: "org.apache.xerces",
            version: "2.9.0",
            cves: vec![("CVE-2009-2625".into(), Some(5.0)), ("CVE-2012-0881".into(), Some(7.5))],
            repos: range(60, 87),
        },
        DemoLibrary {
            digest: "b18c4d7e6f9a1b3c5d8e0f2a4b6c7d9e1f3a5b8c",
            group: "org.apache.openjpa",
            artifact: "openjpa-asm-shaded",
            version: "2.2.0",
            cves: vec![("CVE-2013-1768".into(), Some(7.5))],
            repos: range(87, 90),
        },
        DemoLibrary {
            digest: "c29d5e8f7a0b2c4d6e9f1a3b5c7d8e0f2a4b6c9d",
            group: "commons-collections",
            artifact: "commons-collections",
            version: "3.2.1",
            cves: vec![("CVE-2015-7501".into(), None), ("CVE-2015-6420".into(), Some(7.5))],
            repos: range(90, 120),
        },
        DemoLibrary {
            digest: "d3ae6f9a8b1c3d5e7f0a2b4c6d8e9f1a3b5c7d0e",
            group: "com.fasterxml.jackson.core",
            artifact: "jackson-databind",
            version: "2.9.4",
            cves: vec![("CVE-2018-5968".into(), Some(8.1)), ("CVE-2018-7489".into(), Some(8.8))],
            repos: range(100, 140),
        },
        DemoLibrary {
            digest: "e4bf7a0b9c2d4e6f8a1b3c5d7e9f0a2b4c6d8e1f",
            group: "log4j",
            artifact: "log4j",
            version: "1.2.17",
            cves: vec![("CVE-2019-17571".into(), Some(0.0)), ("CVE-2020-9488".into(), Some(3.7))],
            repos: range(120, 160),
        },
        DemoLibrary {
            digest: "f5c08b1c0d3e5f7a9b2c4d6e8f0a1b3c5d7e9f2a",
            group: "junit",
            artifact: "junit",
            version: "4.12",
            cves: vec![],
            repos: range(0, DEMO_REPOSITORIES),
        },
    ];

    let mut org = Organization { libraries: BTreeMap::new(), cves: BTreeMap::new(), affects: BTreeMap::new() };
    let mut per_repo_libs: Vec<Vec<Digest>> = vec![Vec::new(); DEMO_REPOSITORIES];
    for lib in &libraries {
        let digest = Digest::new(lib.digest);
        org.libraries.insert(
            digest.clone(),
            Coordinates { group: lib.group.into(), artifact: lib.artifact.into(), version: lib.version.into() },
        );
        for (id, score) in &lib.cves {
            let cve = CveId::new(id.clone());
            org.cves.insert(cve.clone(), score.map(|s| CvssScore::from_f64(s).unwrap()));
            org.affects.entry(digest.clone()).or_default().insert(cve);
        }
        for &r in &lib.repos {
            per_repo_libs[r].push(digest.clone());
        }
    }

    (0..DEMO_REPOSITORIES)
        .map(|r| {
            let repo_id = format!("eclipse-{r:03}");
            let (repo_name, main_module) = if r == 0 {
                ("low-marmoset".to_owned(), "satisfactory-haddock".to_owned())
            } else {
                (demo_name(2 * r), demo_name(2 * r + 1))
            };
            let main_id = format!("{repo_id}/main");
            let api_id = format!("{repo_id}/api");
            let test_id = format!("{repo_id}/main/test");
            let modules = vec![
                ModuleDecl { id: main_id.as_str().into(), name: main_module, parent_id: None },
                ModuleDecl { id: api_id.as_str().into(), name: format!("{repo_name}-api"), parent_id: None },
                ModuleDecl { id: test_id.as_str().into(), name: format!("{repo_name}-tests"), parent_id: Some(main_id.as_str().into()) },
            ];
            let mut deps = Vec::new();
            for lib in &per_repo_libs[r] {
                // junit goes to the nested test module, everything else to main
                let module = if lib.as_str() == libraries.last().unwrap().digest { &test_id } else { &main_id };
                deps.push(DependsEdge { module_id: module.as_str().into(), library_digest: lib.clone() });
            }
            let repo = Repository {
                id: repo_id.as_str().into(),
                name: repo_name,
                source_url: Some(format!("https://github.com/eclipse/{repo_id}")),
                meta: None,
            };
            org.document(repo, modules, deps)
        })
        .collect()
}

/// Large synthetic organization: `repositories` repositories with five
/// modules each (one nested), about `libraries_per_repository` dependencies
/// per repository drawn from a shared pool, and `cves` distinct CVEs.
pub fn scale_organization(seed: u64, repositories: usize, libraries_per_repository: usize, cves: usize) -> Vec<ScanDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = repositories * libraries_per_repository / 6 + 1;
    let libraries: BTreeMap<Digest, Coordinates> = (0..pool)
        .map(|i| {
            (
                Digest::new(format!("{:040x}", (i as u128 + 1) * 0x9E37_79B9_7F4A_7C15)),
                Coordinates { group: format!("org.pool{}", i % 50), artifact: format!("artifact-{i}"), version: format!("{}.{}", i % 7, i % 11) },
            )
        })
        .collect();
    let lib_ids: Vec<Digest> = libraries.keys().cloned().collect();
    let cve_map: BTreeMap<CveId, Option<CvssScore>> = (0..cves)
        .map(|i| (CveId::new(format!("CVE-{}-{:05}", 2005 + i % 16, 10000 + i)), random_score(&mut rng)))
        .collect();
    let mut affects: BTreeMap<Digest, BTreeSet<CveId>> = BTreeMap::new();
    for cve in cve_map.keys() {
        for _ in 0..rng.gen_range(1..=2) {
            // vulnerable libraries concentrate in the first fifth of the pool
            let lib = &lib_ids[rng.gen_range(0..pool.div_ceil(5))];
            affects.entry(lib.clone()).or_default().insert(cve.clone());
        }
    }
    let org = Organization { libraries, cves: cve_map, affects };

    (0..repositories)
        .map(|r| {
            let repo_id = format!("org-{r:04}");
            let module_ids: Vec<String> = (0..5).map(|m| format!("{repo_id}/m{m}")).collect();
            let modules = module_ids
                .iter()
                .enumerate()
                .map(|(m, id)| ModuleDecl {
                    id: id.as_str().into(),
                    name: format!("module-{m}"),
                    parent_id: (m == 4).then(|| module_ids[0].as_str().into()),
                })
                .collect();
            let mut deps = Vec::new();
            for lib in lib_ids.choose_multiple(&mut rng, libraries_per_repository) {
                let module = &module_ids[rng.gen_range(0..5)];
                deps.push(DependsEdge { module_id: module.as_str().into(), library_digest: lib.clone() });
            }
            let repo = Repository { id: repo_id.as_str().into(), name: demo_name(r), source_url: None, meta: None };
            org.document(repo, modules, deps)
        })
        .collect()
}

/// Writes each document canonically to `<dir>/<repository id>.vulnex.json`.
pub fn write_corpus(dir: &Path, docs: &[ScanDocument]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for doc in docs {
        let stem: String = doc
            .repository
            .id
            .as_str()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        fs::write(dir.join(format!("{stem}{FILE_EXTENSION}")), canonicalize(doc))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn random_organizations_are_valid_and_deterministic() {
        for seed in 0..20 {
            let docs = random_organization(seed, RandomShape::default());
            for d in &docs {
                d.validate().unwrap();
            }
            build_graph(&docs).unwrap();
            assert_eq!(docs, random_organization(seed, RandomShape::default()));
        }
    }

    #[test]
    fn demo_organization_shape() {
        let docs = demo_organization();
        assert_eq!(docs.len(), DEMO_REPOSITORIES);
        let g = build_graph(&docs).unwrap();
        let critical = g
            .vulnerabilities()
            .filter(|v| v.severity() == crate::model::Severity::Critical)
            .count();
        assert_eq!(critical, 8);
        assert_eq!(g.repos_affected_by(&"CVE-2018-1270".into()).unwrap().len(), 20);
        assert_eq!(g.repos_affected_by(&"CVE-2017-12629".into()).unwrap().len(), 14);
        assert_eq!(g.repos_affected_by(&"CVE-2009-2625".into()).unwrap().len(), 27);
        let names: BTreeSet<_> = g.repositories().map(|r| r.name.clone()).collect();
        assert_eq!(names.len(), DEMO_REPOSITORIES);
    }
}

/// Brute-force reference answers computed from raw scan documents, without
/// the graph indexes. Slow but obviously correct; used by property checks.
pub mod oracle {
    use std::collections::{BTreeMap, BTreeSet};

    use crate::ingest::ScanDocument;
    use crate::model::EntityRef;

    /// (repository, module path from the top-level module, library, CVE)
    pub type Quad = (String, Vec<String>, String, String);

    fn module_path(doc: &ScanDocument, module: &str) -> Vec<String> {
        let mut path = vec![module.to_owned()];
        let mut current = module.to_owned();
        while let Some(parent) = doc.modules.iter().find(|m| m.id.as_str() == current).and_then(|m| m.parent_id.clone()) {
            path.push(parent.as_str().to_owned());
            current = parent.as_str().to_owned();
        }
        path.reverse();
        path
    }

    fn affects(docs: &[ScanDocument]) -> BTreeSet<(String, String)> {
        docs.iter()
            .flat_map(|d| d.affects.iter().map(|a| (a.library_digest.as_str().to_owned(), a.cve_id.as_str().to_owned())))
            .collect()
    }

    pub fn quadruples(docs: &[ScanDocument]) -> BTreeSet<Quad> {
        let affects = affects(docs);
        let mut out = BTreeSet::new();
        for doc in docs {
            for dep in &doc.dependencies {
                for (lib, cve) in &affects {
                    if lib == dep.library_digest.as_str() {
                        out.insert((
                            doc.repository.id.as_str().to_owned(),
                            module_path(doc, dep.module_id.as_str()),
                            lib.clone(),
                            cve.clone(),
                        ));
                    }
                }
            }
        }
        out
    }

    pub fn repos_affected_by(docs: &[ScanDocument], cve: &str) -> BTreeSet<String> {
        quadruples(docs).into_iter().filter(|q| q.3 == cve).map(|q| q.0).collect()
    }

    /// Distinct CVEs below an entity: everything reachable through its
    /// modules (nested ones included), a library's own CVEs, or the CVE itself.
    pub fn exposed_cves(docs: &[ScanDocument], entity: &EntityRef) -> BTreeSet<String> {
        let id = entity.id();
        match entity {
            EntityRef::Repository(_) => quadruples(docs).into_iter().filter(|q| q.0 == id).map(|q| q.3).collect(),
            EntityRef::Module(_) => quadruples(docs).into_iter().filter(|q| q.1.iter().any(|m| m == id)).map(|q| q.3).collect(),
            EntityRef::Library(_) => affects(docs).into_iter().filter(|(l, _)| l == id).map(|(_, c)| c).collect(),
            EntityRef::Vulnerability(_) => BTreeSet::from([id.to_owned()]),
        }
    }

    /// Declared score per CVE as a float; absent scores map to `None`.
    pub fn scores(docs: &[ScanDocument]) -> BTreeMap<String, Option<f64>> {
        let mut out: BTreeMap<String, Option<f64>> = BTreeMap::new();
        for v in docs.iter().flat_map(|d| &d.vulnerabilities) {
            let slot = out.entry(v.cve_id.as_str().to_owned()).or_default();
            if slot.is_none() {
                *slot = v.cvss_score.map(|s| s.value());
            }
        }
        out
    }

    /// Severity bucket by plain float comparison: 0 = unscored, then the
    /// Low / Medium / High / Critical ranges.
    pub fn bucket(score: Option<f64>) -> usize {
        match score {
            None => 0,
            Some(s) if s <= 0.0 => 0,
            Some(s) if s < 4.0 => 1,
            Some(s) if s < 7.0 => 2,
            Some(s) if s < 9.0 => 3,
            Some(_) => 4,
        }
    }
}
