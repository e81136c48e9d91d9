//! Command-line front end and HTTP service.

pub mod cli;
pub mod commands;
pub mod report;
pub mod server;
