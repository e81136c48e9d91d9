//! Subcommand implementations. Each returns the process exit code.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use vulnex_core::analytics::pseudonymize;
use vulnex_core::enrich::{code_host_provider, enrich_graph, fixture_provider, FixtureProvider, MetaProvider};
use vulnex_core::graph::build_graph;
use vulnex_core::ingest::{adapt_external, canonicalize, ingest_directory};
use vulnex_core::snapshot::{load_snapshot, save_snapshot, Snapshot};
use vulnex_core::view::{render_view, ViewRequest};

use crate::cli::{ConvertArgs, EnrichArgs, FormatArg, IngestArgs, ReportArgs, ServeArgs};
use crate::report::to_csv;
use crate::server::{router, AppState};

pub const EXIT_OK: u8 = 0;
/// Rejected input files, invalid flags or requests.
pub const EXIT_FAILURE: u8 = 1;
/// Unreadable input directory, missing snapshot, port in use.
pub const EXIT_UNAVAILABLE: u8 = 2;

fn write_output(path: Option<&Path>, bytes: &[u8]) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, bytes),
        None => std::io::stdout().lock().write_all(bytes),
    }
}

pub fn ingest(args: &IngestArgs) -> u8 {
    let (docs, report) = match ingest_directory(&args.dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.dir.display());
            return EXIT_UNAVAILABLE;
        }
    };
    let mut g = match build_graph(&docs) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    if args.pseudonymize {
        match pseudonymize(&g, args.seed) {
            Ok((renamed, mapping)) => {
                g = renamed;
                if let Some(path) = &args.mapping_out {
                    if let Err(e) = fs::write(path, mapping.to_text()) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return EXIT_UNAVAILABLE;
                    }
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_FAILURE;
            }
        }
    }
    if let Err(e) = save_snapshot(&g, &args.out) {
        eprintln!("error: {e}");
        return EXIT_UNAVAILABLE;
    }

    println!(
        "read {} file(s), loaded {} repositories, rejected {}; snapshot written to {}",
        report.files_read,
        report.repositories_loaded,
        report.rejected.len(),
        args.out.display()
    );
    for w in &report.warnings {
        println!("warning: {}: {}", w.file.display(), w.message);
    }
    for r in &report.rejected {
        println!("rejected: {}: {}", r.file.display(), r.message);
    }
    if report.is_clean() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn fixtures(paths: &[impl AsRef<Path>]) -> Result<Vec<FixtureProvider>, u8> {
    paths
        .iter()
        .map(|p| {
            fixture_provider(p.as_ref()).map_err(|e| {
                eprintln!("error: {e}");
                EXIT_UNAVAILABLE
            })
        })
        .collect()
}

pub fn report(args: &ReportArgs) -> u8 {
    let g = match load_snapshot(&args.graph) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: cannot load snapshot: {e}");
            return EXIT_UNAVAILABLE;
        }
    };
    let providers = match fixtures(args.meta_fixtures.as_slice()) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let providers: Vec<&dyn MetaProvider> = providers.iter().map(|p| p as &dyn MetaProvider).collect();
    let snapshot = Snapshot::new(enrich_graph(&g, &providers));
    let req = ViewRequest {
        filter: args.filter.spec(),
        sort: args.sort_spec(),
        expand_all: args.expand_all,
        matrix_columns: args.columns.clone(),
        ..ViewRequest::new(args.view.into())
    };
    let resp = match render_view(&snapshot, &req) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let bytes = match args.format {
        FormatArg::Json => resp.to_canonical_json(),
        FormatArg::Csv => to_csv(&resp),
    };
    if let Err(e) = write_output(args.output.as_deref(), &bytes) {
        eprintln!("error: cannot write report: {e}");
        return EXIT_UNAVAILABLE;
    }
    EXIT_OK
}

pub fn enrich(args: &EnrichArgs) -> u8 {
    let g = match load_snapshot(&args.graph) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: cannot load snapshot: {e}");
            return EXIT_UNAVAILABLE;
        }
    };
    let fixture_providers = match fixtures(&args.meta_fixtures) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let mut providers: Vec<&dyn MetaProvider> = fixture_providers.iter().map(|p| p as &dyn MetaProvider).collect();
    let code_host = match args.codehost_endpoint.as_deref().map(|e| code_host_provider(e, None)).transpose() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_UNAVAILABLE;
        }
    };
    if let Some(p) = &code_host {
        providers.push(p);
    }
    let enriched = enrich_graph(&g, &providers);
    let out = args.out.as_deref().unwrap_or(&args.graph);
    if let Err(e) = save_snapshot(&enriched, out) {
        eprintln!("error: {e}");
        return EXIT_UNAVAILABLE;
    }
    EXIT_OK
}

pub fn convert(args: &ConvertArgs) -> u8 {
    let bytes = match fs::read(&args.input) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.input.display());
            return EXIT_UNAVAILABLE;
        }
    };
    let doc = match adapt_external(&args.adapter, &bytes) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {}: {e}", args.input.display());
            return EXIT_FAILURE;
        }
    };
    if let Err(e) = write_output(args.out.as_deref(), &canonicalize(&doc)) {
        eprintln!("error: {e}");
        return EXIT_UNAVAILABLE;
    }
    EXIT_OK
}

pub fn serve(args: &ServeArgs) -> u8 {
    let graph = match &args.graph {
        Some(path) => match load_snapshot(path) {
            Ok(g) => Some(g),
            Err(e) => {
                eprintln!("error: cannot load snapshot: {e}");
                return EXIT_UNAVAILABLE;
            }
        },
        None => None,
    };
    let providers = match fixtures(args.meta_fixtures.as_slice()) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let state = Arc::new(AppState::new(graph, providers, args.ui_dir.clone()));
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    runtime.block_on(async {
        let addr = format!("{}:{}", args.bind, args.port);
        let listener = match tokio::net::TcpListener::bind(&addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: cannot listen on {addr}: {e}");
                return EXIT_UNAVAILABLE;
            }
        };
        tracing::info!("listening on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAILURE
            }
        }
    })
}

