//! Image I/O, pyramid construction, configuration, checkpointing and the CLI.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod image;
pub mod pyramid;
