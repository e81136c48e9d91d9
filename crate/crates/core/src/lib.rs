//! Organization-wide open-source vulnerability auditing.
//!
//! Scan results are ingested per repository ([`ingest`]), merged into an
//! immutable exposure graph ([`graph`]) and projected into repository-,
//! library- and bug-centered tables with per-row analytics ([`analytics`],
//! [`view`]). [`enrich`] attaches code-quality and popularity metadata.

pub mod analytics;
pub mod enrich;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod snapshot;
pub mod testkit;
pub mod view;
