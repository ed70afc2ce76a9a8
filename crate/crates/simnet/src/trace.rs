//! Event log produced by the simulator and the per-flow counters kept
//! alongside it.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::packet::FlowId;
use crate::time::SimTime;

/// Flow id used for records that belong to the path rather than a flow.
pub const PATH: FlowId = FlowId::MAX;

const MAGIC: &[u8; 4] = b"FTRC";
const VERSION: u16 = 1;
const RECORD_BYTES: usize = 8 + 1 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecordKind {
    Send,
    Deliver,
    DropQueue,
    DropDisconnected,
    /// `value` is the reported receive rate for TFRC reports, else the size.
    FeedbackSent,
    /// `value` carries the new phase code.
    StateTransition,
    /// `value` is the new effective sending rate in bytes/s.
    RateChange,
    /// `value` is 0 for down, 1 for up, 2 for re-parameterised.
    LinkState,
}

impl RecordKind {
    pub fn name(self) -> &'static str {
        match self {
            RecordKind::Send => "send",
            RecordKind::Deliver => "deliver",
            RecordKind::DropQueue => "drop_queue",
            RecordKind::DropDisconnected => "drop_disconnected",
            RecordKind::FeedbackSent => "feedback_sent",
            RecordKind::StateTransition => "state",
            RecordKind::RateChange => "rate",
            RecordKind::LinkState => "link",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        use RecordKind::*;
        [Send, Deliver, DropQueue, DropDisconnected, FeedbackSent, StateTransition, RateChange, LinkState]
            .get(c as usize)
            .copied()
    }

    /// Per-packet kinds, omitted at [`TraceLevel::Control`].
    pub fn is_per_packet(self) -> bool {
        matches!(self, RecordKind::Send | RecordKind::Deliver | RecordKind::FeedbackSent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub t: SimTime,
    pub kind: RecordKind,
    pub flow: FlowId,
    pub seq: u64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    /// Every record.
    #[default]
    Full,
    /// Drops, rate changes, state transitions and link events only.
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// Plain TFRC.
    Tfrc,
    /// TFRC with the Freeze extension.
    Freeze,
    Reno,
}

/// Counters for one flow. Data packets only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped_queue: u64,
    pub dropped_disconnected: u64,
    /// Bytes of new data delivered, in one-second bins.
    pub goodput_bins: Vec<u64>,
    /// (time, sender RTT estimate) at each applied report or RTT sample.
    pub rtt_samples: Vec<(f64, f64)>,
}

impl FlowStats {
    pub fn dropped(&self) -> u64 {
        self.dropped_queue + self.dropped_disconnected
    }

    pub(crate) fn add_goodput(&mut self, t: SimTime, bytes: u64) {
        let bin = (t.0 / 1_000_000_000) as usize;
        if self.goodput_bins.len() <= bin {
            self.goodput_bins.resize(bin + 1, 0);
        }
        self.goodput_bins[bin] += bytes;
    }

    /// Mean goodput in bytes/s over whole bins in `[from, to)` seconds.
    pub fn mean_goodput(&self, from: f64, to: f64) -> f64 {
        let a = from.max(0.0).floor() as usize;
        let b = to.max(0.0).floor() as usize;
        if b <= a {
            return 0.0;
        }
        let sum: u64 = (a..b).map(|i| self.goodput_bins.get(i).copied().unwrap_or(0)).sum();
        sum as f64 / (b - a) as f64
    }

    /// Mean RTT estimate over samples in `[from, to)`.
    pub fn mean_rtt(&self, from: f64, to: f64) -> Option<f64> {
        let xs: Vec<f64> = self
            .rtt_samples
            .iter()
            .filter(|(t, _)| *t >= from && *t < to)
            .map(|(_, r)| *r)
            .collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub level: TraceLevel,
    pub records: Vec<Record>,
    pub flow_kinds: Vec<FlowKind>,
    pub flows: Vec<FlowStats>,
    pub end: SimTime,
}

impl Trace {
    pub fn new(level: TraceLevel) -> Self {
        Self {
            level,
            ..Self::default()
        }
    }

    pub(crate) fn push(&mut self, t: SimTime, kind: RecordKind, flow: FlowId, seq: u64, value: f64) {
        if self.level == TraceLevel::Control && kind.is_per_packet() {
            return;
        }
        self.records.push(Record {
            t,
            kind,
            flow,
            seq,
            value,
        });
    }

    pub fn of_kind(&self, kind: RecordKind) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    /// Times at which the wireless link went down and came back.
    pub fn outages(&self) -> Vec<(SimTime, Option<SimTime>)> {
        let mut out: Vec<(SimTime, Option<SimTime>)> = Vec::new();
        for r in self.of_kind(RecordKind::LinkState) {
            if r.value == 0.0 {
                out.push((r.t, None));
            } else if r.value == 1.0 {
                if let Some(last) = out.last_mut() {
                    if last.1.is_none() {
                        last.1 = Some(r.t);
                    }
                }
            }
        }
        out
    }

    /// Effective sending rate of `flow` as a step function: (time, bytes/s).
    pub fn rate_steps(&self, flow: FlowId) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter(|r| r.kind == RecordKind::RateChange && r.flow == flow)
            .map(|r| (r.t.as_secs(), r.value))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#schema v1")?;
        writeln!(w, "t,kind,flow,seqno,value")?;
        for r in &self.records {
            let flow = if r.flow == PATH { -1 } else { r.flow as i64 };
            writeln!(w, "{},{},{},{},{}", r.t, r.kind.name(), flow, r.seq, r.value)?;
        }
        Ok(())
    }

    /// Compact little-endian log: magic, version, record count, records.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for r in &self.records {
            w.write_all(&r.t.0.to_le_bytes())?;
            w.write_all(&[r.kind.code()])?;
            let flow = if r.flow == PATH { u32::MAX } else { r.flow as u32 };
            w.write_all(&flow.to_le_bytes())?;
            w.write_all(&r.seq.to_le_bytes())?;
            w.write_all(&r.value.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(14 + self.records.len() * RECORD_BYTES);
        self.write_binary(&mut v).expect("writing to a Vec cannot fail");
        v
    }

    /// Reads the records of a binary log. Counters are not part of the log.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<Record>> {
        let mut head = [0u8; 14];
        r.read_exact(&mut head)
            .map_err(|_| SimError::Log("short header".into()))?;
        if &head[..4] != MAGIC {
            return Err(SimError::Log("bad magic".into()));
        }
        let version = u16::from_le_bytes([head[4], head[5]]);
        if version != VERSION {
            return Err(SimError::Log(format!("unsupported version {version}")));
        }
        let n = u64::from_le_bytes(head[6..14].try_into().expect("8 bytes"));
        let mut out = Vec::new();
        let mut buf = [0u8; RECORD_BYTES];
        for i in 0..n {
            r.read_exact(&mut buf)
                .map_err(|_| SimError::Log(format!("truncated at record {i}")))?;
            let kind = RecordKind::from_code(buf[8])
                .ok_or_else(|| SimError::Log(format!("unknown kind {}", buf[8])))?;
            let flow = u32::from_le_bytes(buf[9..13].try_into().expect("4 bytes"));
            out.push(Record {
                t: SimTime(u64::from_le_bytes(buf[..8].try_into().expect("8 bytes"))),
                kind,
                flow: if flow == u32::MAX { PATH } else { flow as FlowId },
                seq: u64::from_le_bytes(buf[13..21].try_into().expect("8 bytes")),
                value: f64::from_le_bytes(buf[21..29].try_into().expect("8 bytes")),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let mut t = Trace::new(TraceLevel::Full);
        t.push(SimTime(5), RecordKind::Send, 0, 1, 0.0);
        t.push(SimTime(9), RecordKind::LinkState, PATH, 0, 1.0);
        let back = Trace::read_binary(&t.to_binary()[..]).unwrap();
        assert_eq!(back, t.records);
        assert!(Trace::read_binary(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn control_level_skips_per_packet_records() {
        let mut t = Trace::new(TraceLevel::Control);
        t.push(SimTime(5), RecordKind::Send, 0, 1, 0.0);
        t.push(SimTime(5), RecordKind::DropQueue, 0, 1, 0.0);
        assert_eq!(t.records.len(), 1);
    }

    #[test]
    fn goodput_bins() {
        let mut s = FlowStats::default();
        s.add_goodput(SimTime::from_secs(0.5), 100);
        s.add_goodput(SimTime::from_secs(2.5), 300);
        assert_eq!(s.goodput_bins, vec![100, 0, 300]);
        assert_eq!(s.mean_goodput(0.0, 3.0), 400.0 / 3.0);
    }
}
