//! HTTP API, command line and configuration around `askg-core`.

pub mod cli;
pub mod config;
pub mod engine;
pub mod http;
pub mod log;
