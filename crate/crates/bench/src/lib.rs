//! Experiment runner for the GWishart sampler benchmarks.

pub mod config;
pub mod error;
pub mod experiments;
pub mod ingest;
pub mod svg;
pub mod synthetic;
pub mod table;

pub use config::Config;
pub use error::{BenchError, Result};
