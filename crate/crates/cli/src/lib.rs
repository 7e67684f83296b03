//! Configuration parsing, experiment execution and CSV emission for the
//! `vlstein` binary.

pub mod config;
pub mod modes;
pub mod sweep;

use thiserror::Error;

pub use config::{ChannelSpec, ExperimentConfig, Mode, SourceSpec, SweepSpec, SweptParameter};
pub use modes::{run, Outcome};
pub use sweep::{emit_sweep_csv, run_sweep, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Core(#[from] vlstein_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(field: &str, message: impl ToString) -> Self {
        CliError::Config {
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use vlstein_core::Error as E;
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Core(E::ResourceLimit(_)) => EXIT_RESOURCE,
            CliError::Core(E::NonConvergence(_)) | CliError::Io(_) => EXIT_OTHER,
            // Everything else is a bad parameter somewhere in the config.
            CliError::Core(_) => EXIT_CONFIG,
        }
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
