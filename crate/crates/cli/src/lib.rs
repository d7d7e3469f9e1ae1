//! Batch front end for the relevance pipeline: checkpoints, configuration,
//! rank files and the `relscore` subcommands.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod synth;
pub mod tsv;
