//! Reactive handover baseline: A1-A5 measurement events on RSRP traces and
//! A5 triggering after a time-to-trigger.
//!
//! A5 fires when the secondary cell is at least `gamma1_dbm` and the primary
//! cell at most `gamma2_dbm`. Some descriptions of the event swap the two
//! threshold names; the assignment here is the one used in RRC tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsrpTrace {
    timestamps: Vec<f64>,
    pcell_rsrp_dbm: Vec<f64>,
    scell_rsrp_dbm: Vec<f64>,
}

impl RsrpTrace {
    pub fn new(timestamps: Vec<f64>, pcell_rsrp_dbm: Vec<f64>, scell_rsrp_dbm: Vec<f64>) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::data("RSRP trace is empty"));
        }
        if timestamps.len() != pcell_rsrp_dbm.len() || timestamps.len() != scell_rsrp_dbm.len() {
            return Err(Error::data("RSRP trace columns differ in length"));
        }
        if timestamps.iter().chain(&pcell_rsrp_dbm).chain(&scell_rsrp_dbm).any(|v| !v.is_finite()) {
            return Err(Error::data("RSRP trace contains non-finite values"));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::data("RSRP trace timestamps must be strictly increasing"));
        }
        Ok(RsrpTrace {
            timestamps,
            pcell_rsrp_dbm,
            scell_rsrp_dbm,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn pcell(&self) -> &[f64] {
        &self.pcell_rsrp_dbm
    }

    pub fn scell(&self) -> &[f64] {
        &self.scell_rsrp_dbm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    /// A1/A2/A4 threshold.
    pub gamma_dbm: f64,
    /// A3 offset.
    pub delta_db: f64,
    /// A5 secondary-cell floor.
    pub gamma1_dbm: f64,
    /// A5 primary-cell ceiling.
    pub gamma2_dbm: f64,
    pub ttt_s: f64,
}

impl EventConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.gamma_dbm, self.delta_db, self.gamma1_dbm, self.gamma2_dbm, self.ttt_s]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("event thresholds must be finite"));
        }
        if self.ttt_s < 0.0 {
            return Err(Error::config("time-to-trigger must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    A1,
    A2,
    A3,
    A4,
    A5,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [EventKind::A1, EventKind::A2, EventKind::A3, EventKind::A4, EventKind::A5];

    /// Entry condition for one sample of primary (`p`) and secondary (`s`) RSRP.
    pub fn holds(self, p: f64, s: f64, cfg: &EventConfig) -> bool {
        match self {
            EventKind::A1 => p >= cfg.gamma_dbm,
            EventKind::A2 => p < cfg.gamma_dbm,
            EventKind::A3 => s >= p + cfg.delta_db,
            EventKind::A4 => s >= cfg.gamma_dbm,
            EventKind::A5 => s >= cfg.gamma1_dbm && p <= cfg.gamma2_dbm,
        }
    }
}

/// A maximal run of samples satisfying an event condition. `t_end` is the
/// time of the first sample after the run, or `None` if the run reaches the
/// end of the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventOccurrence {
    pub kind: EventKind,
    pub t_start: f64,
    pub t_end: Option<f64>,
}

/// Sample-index runs where `kind` holds, as `(first, one_past_last)`.
fn runs(trace: &RsrpTrace, kind: EventKind, cfg: &EventConfig) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for i in 0..trace.len() {
        let on = kind.holds(trace.pcell_rsrp_dbm[i], trace.scell_rsrp_dbm[i], cfg);
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, trace.len()));
    }
    out
}

/// All occurrences of every event, ordered by kind then start time.
pub fn evaluate_events(trace: &RsrpTrace, config: &EventConfig) -> Vec<EventOccurrence> {
    let t = &trace.timestamps;
    EventKind::ALL
        .iter()
        .flat_map(|&kind| {
            runs(trace, kind, config).into_iter().map(move |(a, b)| EventOccurrence {
                kind,
                t_start: t[a],
                t_end: t.get(b).copied(),
            })
        })
        .collect()
}

/// Earliest sample time at which A5 has held on every sample since at least
/// `ttt_s` seconds earlier.
pub fn handover_trigger(trace: &RsrpTrace, config: &EventConfig) -> Option<f64> {
    let t = &trace.timestamps;
    runs(trace, EventKind::A5, config).into_iter().find_map(|(a, b)| {
        let due = t[a] + config.ttt_s;
        let slack = 1e-9 * due.abs().max(1.0);
        t[a..b].iter().copied().find(|&ti| ti >= due - slack)
    })
}
