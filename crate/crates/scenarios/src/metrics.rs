//! Measurements over handover traces.

use tfrc_simnet::{RecordKind, Trace, SEGMENT};

use crate::error::{Error, Result};
use crate::handover::{FAIRNESS_SKIP, FAIRNESS_WINDOW, SETTLE_CAP};

/// Fraction of the reference rate that counts as settled.
pub const SETTLED_FRACTION: f64 = 0.9;

fn outage(trace: &Trace) -> Result<(f64, f64)> {
    match trace.outages().first() {
        Some((down, Some(up))) => Ok((down.as_secs(), up.as_secs())),
        _ => Err(Error::NoHandover),
    }
}

/// Data packets of `flow` dropped to the disconnection, from the moment the
/// link goes down until it comes back.
pub fn measure_losses(trace: &Trace, flow: usize) -> Result<u64> {
    let (down, up) = outage(trace)?;
    Ok(trace
        .of_kind(RecordKind::DropDisconnected)
        .filter(|r| r.flow == flow)
        .filter(|r| (down..=up).contains(&r.t.as_secs()))
        .count() as u64)
}

/// Effective rate of `flow` at time `t` (the last step at or before it).
pub fn rate_at(steps: &[(f64, f64)], t: f64) -> f64 {
    let i = steps.partition_point(|(ts, _)| *ts <= t);
    if i == 0 {
        0.0
    } else {
        steps[i - 1].1
    }
}

/// First time at or after `from` at which the rate of `flow` reaches the
/// settled fraction of `x_ref`.
pub fn settle_time(trace: &Trace, flow: usize, from: f64, x_ref: f64) -> Option<f64> {
    let steps = trace.rate_steps(flow);
    let target = SETTLED_FRACTION * x_ref;
    if rate_at(&steps, from) >= target {
        return Some(from);
    }
    steps
        .iter()
        .find(|(t, x)| *t >= from && *x >= target)
        .map(|(t, _)| *t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waste {
    /// 500-byte packets' worth of unused capacity.
    pub packets: f64,
    pub settled_at: Option<f64>,
}

/// Integral of `max(x_ref - X(t), 0)` from reconnection until the rate
/// settles, the cap, or the end of the trace, in 500-byte packets.
pub fn measure_wasted(trace: &Trace, flow: usize, x_ref: f64) -> Result<Waste> {
    let (_, up) = outage(trace)?;
    let steps = trace.rate_steps(flow);
    let settled_at = settle_time(trace, flow, up, x_ref);
    let stop = settled_at
        .unwrap_or(f64::INFINITY)
        .min(up + SETTLE_CAP)
        .min(trace.end.as_secs());
    let mut t = up;
    let mut x = rate_at(&steps, up);
    let mut area = 0.0;
    for &(ts, xs) in steps.iter().filter(|(ts, _)| *ts > up && *ts < stop) {
        area += (x_ref - x).max(0.0) * (ts - t);
        t = ts;
        x = xs;
    }
    area += (x_ref - x).max(0.0) * (stop - t).max(0.0);
    Ok(Waste {
        packets: area / SEGMENT as f64,
        settled_at,
    })
}

/// Mean goodput of `flow` over the window divided by that of `other`.
pub fn goodput_ratio(trace: &Trace, flow: usize, other: usize, from: f64, to: f64) -> Result<f64> {
    if to > trace.end.as_secs() {
        return Err(Error::WindowPastEnd {
            end: to,
            trace_end: trace.end.as_secs(),
        });
    }
    let a = trace.flows[flow].mean_goodput(from, to);
    let b = trace.flows[other].mean_goodput(from, to);
    Ok(a / b)
}

/// TFRC to Reno goodput over the fairness window after reconnection.
pub fn fairness_ratio(trace: &Trace, tfrc: usize, reno: usize) -> Result<f64> {
    let (_, up) = outage(trace)?;
    let from = up + FAIRNESS_SKIP;
    goodput_ratio(trace, tfrc, reno, from, from + FAIRNESS_WINDOW)
}

/// How a frozen flow came back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Restoration {
    /// Rate just before the freeze took effect.
    pub before: f64,
    /// First nonzero rate after the freeze.
    pub after: f64,
    /// When the sender resumed.
    pub resumed_at: f64,
}

/// Locates the freeze of `flow` and the first nonzero rate after it.
pub fn restoration(trace: &Trace, flow: usize) -> Option<Restoration> {
    let steps = trace.rate_steps(flow);
    let frozen = steps.iter().position(|(_, x)| *x == 0.0)?;
    let before = steps[..frozen].last()?.1;
    let (resumed_at, after) = *steps[frozen..].iter().find(|(_, x)| *x > 0.0)?;
    Some(Restoration {
        before,
        after,
        resumed_at,
    })
}

/// Shape of a plain TFRC flow across the disconnection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    /// Rate reductions while the link was down.
    pub halvings: usize,
    /// Time from reconnection to the first rate increase.
    pub t_idle: f64,
    /// Rate when the link came back.
    pub rate_at_reconnect: f64,
}

pub fn backoff_shape(trace: &Trace, flow: usize) -> Result<Backoff> {
    let (down, up) = outage(trace)?;
    let steps = trace.rate_steps(flow);
    let halvings = steps
        .windows(2)
        .filter(|w| w[1].0 > down && w[1].0 < up && w[1].1 < w[0].1)
        .count();
    let rate_at_reconnect = rate_at(&steps, up);
    let t_idle = steps
        .iter()
        .find(|(t, x)| *t >= up && *x > rate_at_reconnect)
        .map(|(t, _)| t - up)
        .unwrap_or(f64::INFINITY);
    Ok(Backoff {
        halvings,
        t_idle,
        rate_at_reconnect,
    })
}
