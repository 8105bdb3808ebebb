//! Training, sparsification, and structural analysis of small MLPs that
//! learn hierarchically modular Boolean functions.

pub mod cli;
pub mod dataset;
pub mod detect;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod mlp;
pub mod paths;
pub mod prune;
pub mod rng;
pub mod stats;

pub use cli::cli_main;
pub use error::{Error, Result};
