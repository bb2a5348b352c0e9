//! Experiment harness for the short-pulse approximation study: TOML
//! configuration, five executable scenarios, and machine-readable reports.

pub mod config;
pub mod manifest;
pub mod reports;
pub mod runner;
