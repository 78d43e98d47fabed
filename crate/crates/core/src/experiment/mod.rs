// SPDX-License-Identifier: Apache-2.0

//! Producer/consumer experiments: workload planning, sweeps and reports.

mod config;
pub mod presets;
mod sweep;
mod workload;

use thiserror::Error;

pub use config::{find_key_line, load_config, load_sweep, parse_config, ConfigError, ConfigErrorKind, ExperimentFile};
pub use sweep::{
    emit_report, read_csv, run_experiment, speedup_pct, summary, write_csv, Invalid, Point, ResultRow, ResultTable,
    RunOptions, SweepSpec, DEFAULT_COUNTS, DEFAULT_SIZES,
};
pub use workload::{
    execute, plan, read_region, run_once, write_region, ConsumerSpec, Mode, Plan, ProducerSpec, Region, RunOutcome,
    WorkloadSpec,
};

use crate::noc::NocError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid workload: {0}")]
    Workload(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("consumer {acc} output differs from the producer input at byte {offset}")]
    DataMismatch { acc: String, offset: u64 },
    #[error("{mode}, {consumers} consumers, {bytes} bytes: {source}")]
    Point { mode: Mode, consumers: usize, bytes: u64, source: Box<ExperimentError> },
    #[error("{0}")]
    Io(String),
}

impl From<NocError> for ExperimentError {
    fn from(e: NocError) -> Self {
        ExperimentError::Sim(e.into())
    }
}
