//! Pipeline behind the `swapattn` binary: configuration, the subcommands,
//! and the mapping from failures to exit codes.

pub mod commands;
pub mod config;
pub mod exit;

pub use commands::Context;
pub use config::RunConfig;
