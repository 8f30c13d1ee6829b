use std::io::Write;

use serde::Serialize;

use super::{PeakSample, UpdateRecord};
use crate::error::{Error, Result};

/// Controller decision recorded at a departure (or at `t = 0` for the
/// initial state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerRecord {
    pub t: f64,
    pub n_c: u32,
    pub delta: i32,
    pub measured_peak: Option<f64>,
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<trace>", e))
}

/// `k,t_arrival,t_start,t_depart,Y,W,S,T,D,success,n_c_used`
pub fn write_updates(records: &[UpdateRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "t_arrival", "t_start", "t_depart", "Y", "W", "S", "T", "D", "success", "n_c_used"])?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            r.t_arrival.to_string(),
            r.t_start.to_string(),
            r.t_depart.to_string(),
            r.interarrival.to_string(),
            r.waiting.to_string(),
            r.service.to_string(),
            r.system.to_string(),
            r.interdeparture.to_string(),
            u8::from(r.success).to_string(),
            r.n_c_used.to_string(),
        ])?;
    }
    finish(w)
}

/// `kind,t_peak,value`
pub fn write_peaks(peaks: &[PeakSample], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "t_peak", "value"])?;
    for p in peaks {
        w.write_record([p.kind.as_str().to_string(), p.t_peak.to_string(), p.value.to_string()])?;
    }
    finish(w)
}

/// `t,n_c,delta,measured_peak`; the peak cell is empty when the departure
/// carried no measurement.
pub fn write_controller_trace(records: &[ControllerRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "n_c", "delta", "measured_peak"])?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.n_c.to_string(),
            r.delta.to_string(),
            r.measured_peak.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    finish(w)
}
