//! Experiment harness: trains the CNN and QuNN heads, sweeps white-box
//! attacks, measures transfer between the two families and writes the
//! result tables.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod seeds;
pub mod train;

pub use config::{ConfigOverrides, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use pipeline::{default_data_dir, Experiment};
