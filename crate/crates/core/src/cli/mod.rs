//! Experiment configuration, sweeps and result files.

pub mod config;
pub mod emit;
pub mod report;
pub mod sweep;

pub use config::{
    ConfigFile, Defaults, ExperimentConfig, OutputFormat, Sweep, DEFAULT_MVN_DIMENSION_CAP,
};
pub use emit::{emit, read_csv, read_json_lines, write_csv, write_json_lines, CSV_HEADER};
pub use report::{show_blockfit, BlockFitReport};
pub use sweep::{run_sweep, Probability, ResultRow, SKIPPED_DIMENSION};
