//! Detects when a flow has settled into its stationary regime.

use crate::error::{Result, SimError};
use crate::packet::FlowId;
use crate::sim::Simulator;
use crate::trace::FlowStats;

/// Length of each comparison window, seconds.
pub const WINDOW: f64 = 30.0;
/// Relative change allowed between consecutive windows.
pub const TOLERANCE: f64 = 0.05;
/// How often the detector is consulted while running, seconds.
pub const CHECK_EVERY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationary {
    /// When stationarity was declared.
    pub t: f64,
    /// Mean receive rate over the last window, bytes/s.
    pub x_recv: f64,
    /// Mean sender RTT estimate over the last window, seconds.
    pub rtt: f64,
}

/// Compares the windows `[t - 2W, t - W)` and `[t - W, t)` of a rate
/// function. Needs `t >= 2W`.
pub fn windows_agree(rate: impl Fn(f64, f64) -> f64, t: f64) -> Option<f64> {
    if t < 2.0 * WINDOW {
        return None;
    }
    let a = rate(t - 2.0 * WINDOW, t - WINDOW);
    let b = rate(t - WINDOW, t);
    let hi = a.max(b);
    (hi > 0.0 && (a - b).abs() < TOLERANCE * hi).then_some(b)
}

/// Stationarity of one flow's goodput at time `t`.
pub fn detect(stats: &FlowStats, t: f64) -> Option<Stationary> {
    let x_recv = windows_agree(|a, b| stats.mean_goodput(a, b), t)?;
    let rtt = stats.mean_rtt(t - WINDOW, t).unwrap_or(f64::NAN);
    Some(Stationary { t, x_recv, rtt })
}

/// Runs `sim` until the combined goodput of `flows` is stationary, checking
/// every [`CHECK_EVERY`] seconds, and reports the first flow's figures.
pub fn run_to_stationarity(sim: &mut Simulator, flows: &[FlowId], max_t: f64) -> Result<Stationary> {
    let mut t = 2.0 * WINDOW;
    loop {
        sim.run_until_secs(t);
        let trace = sim.trace();
        let total = |a: f64, b: f64| flows.iter().map(|&f| trace.flows[f].mean_goodput(a, b)).sum::<f64>();
        if windows_agree(total, t).is_some() {
            let first = &trace.flows[flows[0]];
            return Ok(Stationary {
                t,
                x_recv: first.mean_goodput(t - WINDOW, t),
                rtt: first.mean_rtt(t - WINDOW, t).unwrap_or(f64::NAN),
            });
        }
        t += CHECK_EVERY;
        if t > max_t {
            return Err(SimError::NotStationary(max_t));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(bins: Vec<u64>) -> FlowStats {
        FlowStats {
            goodput_bins: bins,
            ..FlowStats::default()
        }
    }

    #[test]
    fn constant_rate_is_stationary_once_warm() {
        let s = stats(vec![1000; 200]);
        assert!(detect(&s, 59.0).is_none());
        let st = detect(&s, 60.0).unwrap();
        assert_eq!(st.x_recv, 1000.0);
    }

    #[test]
    fn square_wave_never_is() {
        let bins: Vec<u64> = (0..600).map(|i| if (i / 30) % 2 == 0 { 2000 } else { 500 }).collect();
        let s = stats(bins);
        for t in (60..=600).step_by(30) {
            assert!(detect(&s, t as f64).is_none(), "t = {t}");
        }
    }
}
