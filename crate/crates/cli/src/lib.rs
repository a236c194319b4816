//! Command-line workflows over the `countseries` library.

pub mod commands;
pub mod config;
pub mod data;

pub use commands::{run, Outcome};
pub use config::Settings;
