//! Dynamic adaptation of the number of channel uses.
//!
//! At every departure the controller moves `n_c` by a step
//! `delta_k in {-1, +1}` (optionally `0`). The step keeps or flips the
//! previous direction depending on whether the measured PAoTI went up or
//! down since the last measurement, and is a fair coin when no comparison
//! is possible.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the previous step is reused after a comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignMode {
    /// Keep the direction when the measured PAoTI increased, flip it when
    /// it decreased.
    #[default]
    Paper,
    /// Flip the direction when the measured PAoTI increased, keep it when
    /// it decreased (a descent heuristic).
    Descent,
}

/// Signal compared between consecutive measurements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Measurement {
    /// The most recent PAoTI peak.
    #[default]
    LastPeak,
    /// Exponentially weighted moving average of the peaks, with weight
    /// `beta` on the newest one.
    Ewma { beta: f64 },
    /// Mean of the peaks collected over blocks of `departures` departures.
    /// `n_c` only moves at block boundaries.
    BlockMean { departures: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub initial_nc: u32,
    pub n_c_min: u32,
    pub n_c_max: u32,
    pub allow_zero_step: bool,
    pub seed: u64,
    pub measurement: Measurement,
    pub sign_mode: SignMode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            initial_nc: 5,
            n_c_min: 1,
            n_c_max: 64,
            allow_zero_step: false,
            seed: 0,
            measurement: Measurement::LastPeak,
            sign_mode: SignMode::Paper,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_c_min == 0 {
            return Err(Error::Config("controller n_c_min must be at least 1".into()));
        }
        if self.n_c_min > self.n_c_max {
            return Err(Error::Config(format!(
                "controller n_c_min = {} exceeds n_c_max = {}",
                self.n_c_min, self.n_c_max
            )));
        }
        if !(self.n_c_min..=self.n_c_max).contains(&self.initial_nc) {
            return Err(Error::Config(format!(
                "initial n_c = {} outside [{}, {}]",
                self.initial_nc, self.n_c_min, self.n_c_max
            )));
        }
        match self.measurement {
            Measurement::Ewma { beta } if !(beta > 0.0 && beta <= 1.0) => {
                return Err(Error::Config(format!("EWMA beta = {beta} must be in (0, 1]")));
            }
            Measurement::BlockMean { departures: 0 } => {
                return Err(Error::Config("block length must be at least one departure".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

/// One controller decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub delta: i32,
    pub n_c: u32,
    /// The measurement used for this decision, if the departure carried one.
    pub measured: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    config: ControllerConfig,
    n_c: u32,
    delta_prev: i32,
    last_measured: Option<f64>,
    block: Block,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, Default)]
struct Block {
    departures: u32,
    peaks: u32,
    sum: f64,
}

impl ControllerState {
    /// Fresh state: `n_c` at its configured start, previous step drawn at
    /// random, nothing measured yet.
    pub fn reset(config: ControllerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let delta_prev = if rng.random_bool(0.5) { 1 } else { -1 };
        Ok(Self { n_c: config.initial_nc, delta_prev, last_measured: None, block: Block::default(), rng, config })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn n_c(&self) -> u32 {
        self.n_c
    }

    pub fn delta_prev(&self) -> i32 {
        self.delta_prev
    }

    pub fn last_measured(&self) -> Option<f64> {
        self.last_measured
    }

    /// Applies one update. `new_peak` is the PAoTI peak of the departure,
    /// present only when the classification succeeded.
    pub fn on_departure(&mut self, new_peak: Option<f64>) -> Step {
        let measured = match self.config.measurement {
            Measurement::BlockMean { departures } => {
                self.block.departures += 1;
                if let Some(p) = new_peak {
                    self.block.peaks += 1;
                    self.block.sum += p;
                }
                if self.block.departures < departures {
                    return Step { delta: 0, n_c: self.n_c, measured: None };
                }
                let b = std::mem::take(&mut self.block);
                (b.peaks > 0).then(|| b.sum / f64::from(b.peaks))
            }
            Measurement::Ewma { beta } => new_peak.map(|p| match self.last_measured {
                Some(prev) => beta * p + (1.0 - beta) * prev,
                None => p,
            }),
            Measurement::LastPeak => new_peak,
        };
        let cmp = match (measured, self.last_measured) {
            (Some(new), Some(old)) => new.partial_cmp(&old),
            _ => None,
        };
        let d = self.delta_prev;
        let delta = match (cmp, self.config.sign_mode) {
            // a zero step carries no direction to keep or flip
            _ if d == 0 => self.random_step(),
            (Some(Ordering::Greater), SignMode::Paper) | (Some(Ordering::Less), SignMode::Descent) => d,
            (Some(Ordering::Less), SignMode::Paper) | (Some(Ordering::Greater), SignMode::Descent) => -d,
            (Some(Ordering::Equal) | None, _) => self.random_step(),
        };
        let next = (i64::from(self.n_c) + i64::from(delta))
            .clamp(i64::from(self.config.n_c_min), i64::from(self.config.n_c_max));
        self.n_c = next as u32;
        self.delta_prev = delta;
        if measured.is_some() {
            self.last_measured = measured;
        }
        Step { delta, n_c: self.n_c, measured }
    }

    fn random_step(&mut self) -> i32 {
        if self.config.allow_zero_step {
            self.rng.random_range(-1..=1)
        } else if self.rng.random_bool(0.5) {
            1
        } else {
            -1
        }
    }
}

/// Drives the controller with a noise-free peak oracle for `updates` steps
/// and returns the `n_c` trajectory, starting with the initial value.
pub fn follow_oracle(state: &mut ControllerState, updates: usize, mut oracle: impl FnMut(u32) -> f64) -> Vec<u32> {
    let mut traj = Vec::with_capacity(updates + 1);
    traj.push(state.n_c());
    for _ in 0..updates {
        let peak = oracle(state.n_c());
        traj.push(state.on_departure(Some(peak)).n_c);
    }
    traj
}
