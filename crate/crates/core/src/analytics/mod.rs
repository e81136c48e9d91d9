//! Per-row analytics cells, filtering, sorting and pseudonymization. All
//! functions are pure reads of a frozen graph.

mod cells;
mod filter;
mod pseudonym;
mod sort;

use thiserror::Error;

use crate::graph::GraphError;
use crate::model::CveId;

pub use cells::{
    cve_matrix, default_matrix_columns, dependency_count, link_count, score_strip, severity_histogram,
    vuln_count, CveMatrix, ScoreStrip, SeverityHistogram, StripEntry, DEFAULT_MATRIX_COLUMNS,
};
pub use filter::{apply_filters, FilterSpec};
pub use pseudonym::{pseudonym_capacity, pseudonym_words, pseudonymize, PseudonymMapping};
pub use sort::{sort_rows, Direction, SortKey, SortSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("unknown matrix column {0}")]
    UnknownColumn(CveId),
    #[error("matrix column count must be at least 1")]
    InvalidColumnCount,
    #[error("{needed} names exceed the pseudonym capacity of {capacity}")]
    PseudonymCapacity { needed: usize, capacity: usize },
}
