//! Configuration, orchestration and data export for the two-crack solvers.
//!
//! Every command reads a flat JSON [`config::RunConfig`] and writes a CSV
//! table plus a JSON sidecar with the configuration echo, its SHA-256 and
//! the residual gates reached.

pub mod commands;
pub mod config;
pub mod output;
