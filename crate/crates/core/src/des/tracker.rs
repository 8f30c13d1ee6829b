use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PeakKind {
    #[serde(rename = "paoi")]
    Paoi,
    #[serde(rename = "paoti")]
    Paoti,
}

impl PeakKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PeakKind::Paoi => "paoi",
            PeakKind::Paoti => "paoti",
        }
    }
}

/// Value of the age process just before a departure resets it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakSample {
    pub kind: PeakKind,
    pub t_peak: f64,
    pub value: f64,
}

/// A departure as seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Departure {
    pub t_depart: f64,
    /// Generation (arrival) time of the departing sample.
    pub t_generated: f64,
    pub success: bool,
}

/// Peaks emitted by one departure: a PAoI peak always, a PAoTI peak only
/// when the classification succeeded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peaks {
    pub paoi: PeakSample,
    pub paoti: Option<PeakSample>,
}

/// Tracks two age processes side by side. The plain age resets to
/// `t - t_generated` at every departure; the task age only on successful
/// classifications. Both start at zero at time zero.
#[derive(Debug, Clone, Default)]
pub struct AgeTracker {
    last_departure: f64,
    last_generated: f64,
    last_success_generated: f64,
}

impl AgeTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Generation time of the freshest correctly classified update.
    pub fn last_success_generated(&self) -> f64 {
        self.last_success_generated
    }

    /// Plain age at time `t`.
    pub fn age(&self, t: f64) -> f64 {
        t - self.last_generated
    }

    /// Task age at time `t`.
    pub fn task_age(&self, t: f64) -> f64 {
        t - self.last_success_generated
    }

    pub fn step(&mut self, dep: Departure) -> Result<Peaks> {
        if dep.t_depart < self.last_departure {
            return Err(Error::TraceOrder { t: dep.t_depart, prev: self.last_departure });
        }
        self.last_departure = dep.t_depart;
        let paoi = PeakSample { kind: PeakKind::Paoi, t_peak: dep.t_depart, value: self.age(dep.t_depart) };
        self.last_generated = dep.t_generated;
        let paoti = dep.success.then(|| {
            let peak = PeakSample { kind: PeakKind::Paoti, t_peak: dep.t_depart, value: self.task_age(dep.t_depart) };
            self.last_success_generated = dep.t_generated;
            peak
        });
        Ok(Peaks { paoi, paoti })
    }
}
