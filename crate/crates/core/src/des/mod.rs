//! Seeded discrete-event simulation of the status-update pipeline.
//!
//! Samples arrive as a Poisson stream, wait in an infinite FCFS queue and
//! occupy the channel for `n_c` time units (one time unit per channel use).
//! Each departure is classified correctly with probability `p_c(n_c)`; only
//! correct classifications reset the task age.
//!
//! Interarrival times and classification outcomes come from two separately
//! seeded streams, so toggling success gating or swapping the success seed
//! leaves the queueing sample path untouched.

mod calendar;
mod stats;
mod trace;
mod tracker;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::accuracy::{AccuracyCurve, CurveView};
use crate::analytics::SystemParams;
use crate::controller::{ControllerConfig, ControllerState};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, ARRIVAL_STREAM, SUCCESS_STREAM};

pub use calendar::{Calendar, EventKind};
pub use stats::Estimate;
pub use trace::{write_controller_trace, write_peaks, write_updates, ControllerRecord};
pub use tracker::{AgeTracker, Departure, PeakKind, PeakSample, Peaks};

/// FCFS waiting time of the next sample:
/// `max(0, prev_waiting + prev_service - interarrival)`.
pub fn lindley_waiting(prev_waiting: f64, prev_service: f64, interarrival: f64) -> f64 {
    (prev_waiting + prev_service - interarrival).max(0.0)
}

/// When a sample's number of channel uses is fixed under a controller.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceBinding {
    /// The value in effect when the sample enters service.
    #[default]
    ServiceStart,
    /// The value in effect when the sample arrives.
    Arrival,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Arrival rate and, without a controller, the fixed `n_c`.
    pub params: SystemParams,
    /// Number of departures to simulate.
    pub horizon: u64,
    pub seed: u64,
    /// Overrides the seed of the classification stream only.
    pub success_seed: Option<u64>,
    /// Leading fraction of departures excluded from the statistics.
    pub warmup_fraction: f64,
    pub batches: usize,
    pub record_trace: bool,
    pub binding: ServiceBinding,
    pub view: CurveView,
    pub controller: Option<ControllerConfig>,
    /// Extra time units added to every service. Nonzero values exist only to
    /// check that validation catches a wrong service model.
    pub service_padding: u32,
}

impl SimConfig {
    pub fn new(params: SystemParams, horizon: u64, seed: u64) -> Self {
        Self {
            params,
            horizon,
            seed,
            success_seed: None,
            warmup_fraction: 0.01,
            batches: 32,
            record_trace: false,
            binding: ServiceBinding::ServiceStart,
            view: CurveView::Raw,
            controller: None,
            service_padding: 0,
        }
    }

    pub fn with_controller(mut self, controller: ControllerConfig) -> Self {
        self.controller = Some(controller);
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least one departure".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!("warm-up fraction {} must be in [0, 1)", self.warmup_fraction)));
        }
        if self.batches == 0 {
            return Err(Error::Config("batch count must be positive".into()));
        }
        match &self.controller {
            Some(c) => c.validate(),
            None => self.params.ensure_stable(),
        }
    }
}

/// Lifecycle of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateRecord {
    pub k: u64,
    pub t_arrival: f64,
    pub t_start: f64,
    pub t_depart: f64,
    /// Interarrival time `Y_k`.
    pub interarrival: f64,
    pub waiting: f64,
    pub service: f64,
    /// `waiting + service`.
    pub system: f64,
    /// Interdeparture time `D_k`.
    pub interdeparture: f64,
    pub success: bool,
    pub n_c_used: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub n_arrivals: u64,
    pub n_departures: u64,
    pub n_successes: u64,
    /// Departures discarded as warm-up.
    pub n_warmup: u64,
    pub paoi: Estimate,
    /// `None` when no classification succeeded after warm-up.
    pub paoti: Option<Estimate>,
    pub waiting: Estimate,
    pub empirical_success_rate: f64,
    /// Average number of channel uses per departure.
    pub mean_n_c: f64,
}

impl SimStats {
    pub fn mean_paoi_peak(&self) -> f64 {
        self.paoi.mean
    }

    pub fn mean_paoti_peak(&self) -> Option<f64> {
        self.paoti.map(|e| e.mean)
    }

    pub fn mean_waiting(&self) -> f64 {
        self.waiting.mean
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub updates: Vec<UpdateRecord>,
    pub peaks: Vec<PeakSample>,
    pub controller: Vec<ControllerRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub stats: SimStats,
    pub trace: Option<Trace>,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    k: u64,
    t_arrival: f64,
    interarrival: f64,
    n_c_at_arrival: u32,
}

#[derive(Debug, Clone, Copy)]
struct InService {
    sample: Sample,
    t_start: f64,
    n_c: u32,
}

/// Runs the simulation for exactly `config.horizon` departures.
pub fn run_sim(config: &SimConfig, curve: &AccuracyCurve) -> Result<SimOutput> {
    config.validate()?;
    let lambda = config.params.lambda();
    let horizon = config.horizon;
    let interarrival = Exp::new(lambda).map_err(|e| Error::Config(format!("interarrival law: {e}")))?;
    let mut arrival_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[ARRIVAL_STREAM]));
    let success_seed = config.success_seed.unwrap_or_else(|| derive_seed(config.seed, &[SUCCESS_STREAM]));
    let mut success_rng = ChaCha8Rng::seed_from_u64(success_seed);

    let mut controller = config.controller.clone().map(ControllerState::reset).transpose()?;
    let current_n_c = |c: &Option<ControllerState>| c.as_ref().map_or(config.params.n_c(), ControllerState::n_c);

    let warmup = ((horizon as f64) * config.warmup_fraction).floor() as u64;
    let span = horizon - warmup;
    let mut paoi_acc = stats::BatchMeans::new(span, config.batches);
    let mut paoti_acc = stats::BatchMeans::new(span, config.batches);
    let mut wait_acc = stats::BatchMeans::new(span, config.batches);

    let mut trace = config.record_trace.then(Trace::default);
    if let (Some(tr), Some(c)) = (trace.as_mut(), controller.as_ref()) {
        tr.controller.push(ControllerRecord { t: 0.0, n_c: c.n_c(), delta: c.delta_prev(), measured_peak: None });
    }

    let mut calendar = Calendar::new();
    let mut queue: VecDeque<Sample> = VecDeque::new();
    let mut server: Option<InService> = None;
    let mut tracker = AgeTracker::new();

    let mut n_arrivals = 0u64;
    let mut n_departures = 0u64;
    let mut n_successes = 0u64;
    let mut n_c_total = 0u64;
    let mut last_arrival = 0.0f64;
    let mut last_departure = 0.0f64;

    calendar.schedule(interarrival.sample(&mut arrival_rng), EventKind::Arrival);

    let start_service = |sample: Sample, now: f64, controller: &Option<ControllerState>, calendar: &mut Calendar| {
        let n_c = match config.binding {
            ServiceBinding::ServiceStart => current_n_c(controller),
            ServiceBinding::Arrival => sample.n_c_at_arrival,
        };
        calendar.schedule(now + f64::from(n_c + config.service_padding), EventKind::Departure);
        InService { sample, t_start: now, n_c }
    };

    while n_departures < horizon {
        let event = calendar.pop().expect("an arrival or departure is always pending");
        let now = event.time;
        match event.kind {
            EventKind::Arrival => {
                n_arrivals += 1;
                let sample = Sample {
                    k: n_arrivals,
                    t_arrival: now,
                    interarrival: now - last_arrival,
                    n_c_at_arrival: current_n_c(&controller),
                };
                last_arrival = now;
                if n_arrivals < horizon {
                    calendar.schedule(now + interarrival.sample(&mut arrival_rng), EventKind::Arrival);
                }
                if server.is_none() {
                    server = Some(start_service(sample, now, &controller, &mut calendar));
                } else {
                    queue.push_back(sample);
                }
            }
            EventKind::Departure => {
                let done = server.take().expect("departure without a sample in service");
                n_departures += 1;
                n_c_total += u64::from(done.n_c);
                let p_c = curve.lookup_view(done.n_c, config.view);
                let success = success_rng.random::<f64>() < p_c;
                if success {
                    n_successes += 1;
                }
                let peaks = tracker.step(Departure { t_depart: now, t_generated: done.sample.t_arrival, success })?;

                let waiting = done.t_start - done.sample.t_arrival;
                if n_departures > warmup {
                    let idx = n_departures - warmup - 1;
                    paoi_acc.push(idx, peaks.paoi.value);
                    wait_acc.push(idx, waiting);
                    if let Some(p) = peaks.paoti {
                        paoti_acc.push(idx, p.value);
                    }
                }

                let step = controller.as_mut().map(|c| c.on_departure(peaks.paoti.map(|p| p.value)));

                if let Some(tr) = trace.as_mut() {
                    tr.updates.push(UpdateRecord {
                        k: done.sample.k,
                        t_arrival: done.sample.t_arrival,
                        t_start: done.t_start,
                        t_depart: now,
                        interarrival: done.sample.interarrival,
                        waiting,
                        service: f64::from(done.n_c + config.service_padding),
                        system: now - done.sample.t_arrival,
                        interdeparture: now - last_departure,
                        success,
                        n_c_used: done.n_c,
                    });
                    tr.peaks.push(peaks.paoi);
                    tr.peaks.extend(peaks.paoti);
                    if let Some(s) = step {
                        tr.controller.push(ControllerRecord {
                            t: now,
                            n_c: s.n_c,
                            delta: s.delta,
                            measured_peak: s.measured,
                        });
                    }
                }
                last_departure = now;

                if let Some(next) = queue.pop_front() {
                    server = Some(start_service(next, now, &controller, &mut calendar));
                }
            }
        }
    }

    let paoi = paoi_acc.estimate().expect("at least one departure after warm-up");
    let waiting = wait_acc.estimate().expect("at least one departure after warm-up");
    let stats = SimStats {
        n_arrivals,
        n_departures,
        n_successes,
        n_warmup: warmup,
        paoi,
        paoti: paoti_acc.estimate(),
        waiting,
        empirical_success_rate: n_successes as f64 / n_departures as f64,
        mean_n_c: n_c_total as f64 / n_departures as f64,
    };
    Ok(SimOutput { stats, trace })
}
