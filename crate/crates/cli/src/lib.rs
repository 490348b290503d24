//! Scenario ingestion and subcommands behind the `memheat` binary.

pub mod commands;
pub mod config;
