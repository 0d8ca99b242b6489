//! Discrete closed-loop simulation, observer-only replay and result files.

mod closed_loop;
mod config;
mod record;
mod replay;

use rayon::prelude::*;
use thiserror::Error;

use crate::controller::ControlError;
use crate::sensing::{Observability, SensingError};

pub use closed_loop::{run_closed_loop, run_closed_loop_logged, ClosedLoop, TickOutput};
pub use config::{ConfigError, ObserverVariant, RTildeSource, SimConfig, REFERENCE_R0};
pub use record::{
    read_run_csv, write_run, Row, RunLog, RunRecord, Summary, CSV_HEADER, LANDMARK_LOG_HEADER,
    TRUTH_HEADER,
};
pub use replay::{
    read_inputs, read_landmark_log, read_truth, run_replay, InputSample, LoggedFrame,
    LoggedLandmark, TruthSample,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sensor suite is not observable ({0:?})")]
    Unobservable(Observability),
    #[error("reconstruction failed at tick {tick}: {source}")]
    Reconstruction { tick: usize, source: SensingError },
    #[error("controller failed at tick {tick}: {source}")]
    Control { tick: usize, source: ControlError },
    #[error("simulation diverged at tick {tick}: {what} is not finite")]
    Diverged { tick: usize, what: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {msg}")]
    Csv {
        path: String,
        line: u64,
        msg: String,
    },
    #[error("{0} contains no data rows")]
    EmptyLog(String),
}

/// Runs independent configurations in parallel, results in input order.
pub fn run_batch(configs: &[SimConfig]) -> Vec<Result<RunRecord, SimError>> {
    configs.par_iter().map(run_closed_loop).collect()
}
