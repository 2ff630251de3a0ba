//! File formats, dataset directories and the command implementations for
//! the `tensorrec` binary, built on [`tensorrec_core`].

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod feature_file;
pub mod interactions;
pub mod report;
pub mod store;

pub use error::{Error, Result};
pub use tensorrec_core as core;
