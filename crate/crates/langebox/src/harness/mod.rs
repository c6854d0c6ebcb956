//! Experiment orchestration: configuration, persistence, reports, the
//! growing-box experiment and the command-line pipelines.

pub mod cli;
pub mod config;
pub mod nv;
pub mod report;
pub mod snapshot;

pub use cli::{cli_dispatch, Cli, Command};
pub use config::{half_integer_schedule, load_config, Config};
pub use nv::{run_nv_limit, NvReport, NvSchedule};
pub use report::{ExperimentManifest, write_csv, write_json};
pub use snapshot::{load_snapshot, save_snapshot, Snapshot, SnapshotHeader, SnapshotPayload};
