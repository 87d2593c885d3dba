//! Configuration, persistence and subcommand dispatch.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{execute, Command, Outcome};
pub use config::{parse_config, print_config, ConfigErrors, Mode, ScenarioConfig};
pub use output::{
    load_snapshot, save_snapshot, validate_report, write_dsmc_timeseries, write_report,
    write_timeseries, DsmcRow, Report, Snapshot, SnapshotState,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error("run failed: {0}")]
    Run(String),
}

macro_rules! run_error {
    ($($t:ty),*) => {$(
        impl From<$t> for IoError {
            fn from(e: $t) -> Self {
                IoError::Run(e.to_string())
            }
        }
    )*};
}

run_error!(
    crate::kernels::KernelError,
    crate::collision::CollisionError,
    crate::spray_solver::SolverError,
    crate::verify::VerifyError
);
