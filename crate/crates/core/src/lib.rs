//! Critical-path pulse scheduling for superconducting-qubit circuits.
//!
//! The crate is organised as a small compiler pipeline plus the tooling needed
//! to evaluate it:
//!
//! * [`circuit`] holds the gate-level IR, a line-oriented parser and the
//!   single-qubit decompositions into `{Rz, Sx, Sx†}` or `{Rz, Rx}`.
//! * [`scheduler`] turns a decomposed circuit into an activity-on-node
//!   dependency graph, runs the Critical Path Method and stretches gates that
//!   have slack into longer implementations without changing the makespan.
//! * [`gateset`] is the catalog of calibrated implementations, the duration
//!   policies and the simulated Rabi calibration loop.
//! * [`pulse`] synthesizes Square, Gaussian, Gaussian-Square and DRAG envelopes.
//! * [`sim`] is a three-level density-matrix simulator with T1/T2 decay.
//! * [`bench`] generates randomized-benchmarking circuits and compares fixed
//!   and time-optimized schedules.

pub mod bench;
pub mod circuit;
pub mod error;
pub mod gateset;
pub mod linalg;
pub mod pulse;
pub mod scheduler;
pub mod sim;

pub use error::{Error, Result};

/// Sampling time of the reference backend, in nanoseconds.
pub const DT_NS: f64 = 0.5;
