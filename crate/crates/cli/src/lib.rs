//! Experiment harness for `balkwise-core`: configs, drivers that reproduce
//! the estimator and pricing studies, and CSV/JSON/SVG emission.

pub mod app;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod parallel;
pub mod stats;
pub mod svg;

pub use error::{CliError, Result};
