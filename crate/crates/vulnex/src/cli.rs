use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vulnex_core::analytics::{Direction, FilterSpec, SortKey, SortSpec};
use vulnex_core::graph::TreeOrdering;
use vulnex_core::model::CveId;

pub const DEFAULT_GRAPH: &str = "vulnex-graph.json";
pub const DEFAULT_PORT: u16 = 8480;

#[derive(Debug, Parser)]
#[command(name = "vulnex", version, about = "Audit an organization's open-source dependencies for known vulnerabilities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a directory of scan files into a graph snapshot.
    Ingest(IngestArgs),
    /// Write a filtered, sorted table view as JSON or CSV.
    Report(ReportArgs),
    /// Serve the HTTP API and the browser UI.
    Serve(ServeArgs),
    /// Fill repository and library metadata in a snapshot.
    Enrich(EnrichArgs),
    /// Convert an external scan report into a scan file.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory containing *.vulnex.json files.
    #[arg(env = "VULNEX_INGEST_DIR")]
    pub dir: PathBuf,
    #[arg(long, env = "VULNEX_GRAPH", default_value = DEFAULT_GRAPH)]
    pub out: PathBuf,
    /// Replace repository and module names with adjective-animal pseudonyms.
    #[arg(long, env = "VULNEX_PSEUDONYMIZE")]
    pub pseudonymize: bool,
    #[arg(long, env = "VULNEX_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Where to write the original → pseudonym table.
    #[arg(long, env = "VULNEX_MAPPING_OUT", requires = "pseudonymize")]
    pub mapping_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ViewArg {
    #[value(alias = "repositories")]
    Repo,
    #[value(alias = "libraries")]
    Lib,
    #[value(alias = "bugs")]
    Bug,
}

impl From<ViewArg> for TreeOrdering {
    fn from(v: ViewArg) -> Self {
        match v {
            ViewArg::Repo => TreeOrdering::RepositoryCentered,
            ViewArg::Lib => TreeOrdering::LibraryCentered,
            ViewArg::Bug => TreeOrdering::BugCentered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SortArg {
    MostSevere,
    VulnCount,
    LinkCount,
    Name,
}

impl From<SortArg> for SortKey {
    fn from(s: SortArg) -> Self {
        match s {
            SortArg::MostSevere => SortKey::MostSevere,
            SortArg::VulnCount => SortKey::VulnerabilityCount,
            SortArg::LinkCount => SortKey::LinkCount,
            SortArg::Name => SortKey::Name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Asc,
    Desc,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Case-insensitive substring of the top-level row name.
    #[arg(long, env = "VULNEX_NAME")]
    pub name: Option<String>,
    #[arg(long, env = "VULNEX_MIN_DEPS")]
    pub min_deps: Option<usize>,
    #[arg(long, env = "VULNEX_MAX_DEPS")]
    pub max_deps: Option<usize>,
    #[arg(long, env = "VULNEX_MIN_VULNS")]
    pub min_vulns: Option<usize>,
    #[arg(long, env = "VULNEX_MAX_VULNS")]
    pub max_vulns: Option<usize>,
    #[arg(long, env = "VULNEX_MIN_CVSS")]
    pub min_cvss: Option<f64>,
    #[arg(long, env = "VULNEX_MAX_CVSS")]
    pub max_cvss: Option<f64>,
    #[arg(long, env = "VULNEX_HIDE_VULNERABILITY_FREE")]
    pub hide_vulnerability_free: bool,
    #[arg(long, env = "VULNEX_HIDE_UNSCORED")]
    pub hide_unscored: bool,
}

impl FilterArgs {
    pub fn spec(&self) -> FilterSpec {
        FilterSpec {
            name_query: self.name.clone(),
            min_dependencies: self.min_deps,
            max_dependencies: self.max_deps,
            min_vulnerabilities: self.min_vulns,
            max_vulnerabilities: self.max_vulns,
            min_cvss: self.min_cvss,
            max_cvss: self.max_cvss,
            hide_vulnerability_free: self.hide_vulnerability_free,
            hide_unscored_cves: self.hide_unscored,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, env = "VULNEX_VIEW", default_value = "repo")]
    pub view: ViewArg,
    #[arg(long, env = "VULNEX_GRAPH", default_value = DEFAULT_GRAPH)]
    pub graph: PathBuf,
    #[arg(long, env = "VULNEX_FORMAT", default_value = "json")]
    pub format: FormatArg,
    /// Write to a file instead of stdout.
    #[arg(long, short, env = "VULNEX_OUTPUT")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long, env = "VULNEX_SORT", default_value = "most-severe")]
    pub sort: SortArg,
    /// Defaults to descending, except ascending for `name`.
    #[arg(long, env = "VULNEX_DIRECTION")]
    pub direction: Option<DirectionArg>,
    /// Include every descendant row, not only the top level.
    #[arg(long, env = "VULNEX_EXPAND_ALL")]
    pub expand_all: bool,
    /// Comma-separated CVE ids for the matrix (default: the five most widespread).
    #[arg(long, env = "VULNEX_COLUMNS", value_delimiter = ',')]
    pub columns: Option<Vec<CveId>>,
    /// Metadata fixture files applied before rendering, consulted in order.
    #[arg(long, env = "VULNEX_META_FIXTURES", value_delimiter = ',')]
    pub meta_fixtures: Vec<PathBuf>,
}

impl ReportArgs {
    pub fn sort_spec(&self) -> SortSpec {
        let key = SortKey::from(self.sort);
        let direction = match self.direction {
            Some(DirectionArg::Asc) => Direction::Asc,
            Some(DirectionArg::Desc) => Direction::Desc,
            None => key.default_direction(),
        };
        SortSpec { key, direction }
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "VULNEX_PORT", default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, env = "VULNEX_BIND", default_value = "127.0.0.1")]
    pub bind: String,
    /// Snapshot to serve. Without it the API answers 409 until a re-ingest.
    #[arg(long, env = "VULNEX_GRAPH")]
    pub graph: Option<PathBuf>,
    /// Metadata fixture files applied to every installed snapshot.
    #[arg(long, env = "VULNEX_META_FIXTURES", value_delimiter = ',')]
    pub meta_fixtures: Vec<PathBuf>,
    /// Directory holding the built UI bundle.
    #[arg(long, env = "VULNEX_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnrichArgs {
    #[arg(long, env = "VULNEX_GRAPH", default_value = DEFAULT_GRAPH)]
    pub graph: PathBuf,
    /// Defaults to overwriting the input snapshot.
    #[arg(long, env = "VULNEX_ENRICH_OUT")]
    pub out: Option<PathBuf>,
    /// Metadata fixture files, consulted in order.
    #[arg(long, env = "VULNEX_META_FIXTURES", value_delimiter = ',')]
    pub meta_fixtures: Vec<PathBuf>,
    /// Base URL of a GitHub-compatible REST API, consulted after the fixtures.
    /// The token is read from VULNEX_CODEHOST_TOKEN.
    #[arg(long, env = "VULNEX_CODEHOST_ENDPOINT")]
    pub codehost_endpoint: Option<String>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    #[arg(long, env = "VULNEX_ADAPTER", default_value = vulnex_core::ingest::STEADY_ADAPTER_ID)]
    pub adapter: String,
    /// Output scan file; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
