//! Peak age of task information (PAoTI) for task-oriented status updates.
//!
//! Samples arrive as a Poisson stream at an FCFS queue, are encoded into
//! `n_c` channel uses (deterministic service of `n_c` time units) and are
//! classified at the receiver. The age only resets when the classification
//! is correct. This crate provides
//!
//! - [`accuracy`]: accuracy curves `p_c(n_c)` (loading, interpolation, fitting),
//! - [`analytics`]: closed-form PAoI/PAoTI for the M/D/1 model and the
//!   age-optimal number of channel uses,
//! - [`des`]: a seeded discrete-event simulator with success-gated age peaks,
//! - [`controller`]: dynamic adaptation of `n_c` driven by measured peaks,
//! - [`experiments`]: parameter sweeps, validation and CSV emission.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accuracy;
pub mod analytics;
pub mod controller;
pub mod des;
mod error;
pub mod experiments;
pub mod fixtures;
pub mod seeds;

pub use accuracy::{AccuracyCurve, CurveSet, CurveSource, CurveView, Dataset, Model, ParametricCurve};
pub use analytics::{AnalyticResult, SystemParams};
pub use controller::{ControllerConfig, ControllerState, Measurement, SignMode};
pub use des::{run_sim, PeakKind, PeakSample, SimConfig, SimOutput, SimStats, UpdateRecord};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, Output, Runner};
