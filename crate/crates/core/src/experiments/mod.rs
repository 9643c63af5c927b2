//! Configuration, sweeps and the invariant report behind the CLI.

pub mod config;
pub mod output;
pub mod sweeps;
pub mod validate;

pub use config::{ConfigError, ExperimentConfig, Grid, OUTPUT_DIR_ENV};
pub use output::{sci, write_outputs, CsvTable};
pub use sweeps::{run_bitload, run_design_waveform, run_fig3_sweep, run_fig4_points, run_fig4_sweep, Fig4Point};
pub use validate::{validate, Check, Report, Status};
