//! Batch runner for the `mobipred` experiments: TOML configs, sweeps,
//! desk-scale figure presets and CSV output.

pub mod app;
pub mod config;
pub mod figures;
pub mod selftest;
pub mod sweep;

pub use config::{parse_config, parse_config_str, ConfigError, ConfigFile, SweepAxis, SweepSpec, SweepValue};
pub use sweep::{run_sweep, CsvRow, CSV_HEADER};
