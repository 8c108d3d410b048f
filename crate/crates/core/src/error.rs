use thiserror::Error;

use crate::bench::BenchError;
use crate::circuit::CircuitError;
use crate::gateset::GateSetError;
use crate::pulse::PulseError;
use crate::scheduler::ScheduleError;
use crate::sim::SimError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for callers that drive the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    GateSet(#[from] GateSetError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for simulation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Sim(e)
            | Error::Bench(BenchError::Sim(e))
            | Error::GateSet(GateSetError::Sim(e)) => {
                if e.is_config() {
                    2
                } else {
                    3
                }
            }
            Error::GateSet(GateSetError::CalibrationFailure { .. } | GateSetError::Fit(_)) => 3,
            _ => 2,
        }
    }
}
