//! Configuration, persistence, error analysis and CSV output for the command-line pipelines.

pub mod analysis;
pub mod config;
pub mod csv;
pub mod manifest;
pub mod pipeline;
pub mod snapfile;

pub use analysis::{error_analysis, relative_errors, ErrorReport, FieldError, SeriesPair, StressError};
pub use config::{parse_config, parse_config_str, Config};
pub use manifest::{sha256_hex, verify_manifest, OutputDir};
pub use snapfile::{load_snapshots, save_snapshots, SnapFile, SnapKind};
