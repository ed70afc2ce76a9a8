//! Closed-form model of a TFRC sender across a disconnection: backoff while
//! disconnected, packets lost, idle time and slow start after reconnection,
//! and the capacity left unused while the rate recovers.
//!
//! Rates are bytes/s, times seconds. Counts are kept fractional until the
//! final output.

mod newton;
pub mod oracle;
mod tables;

pub use newton::newton_raphson;
pub use oracle::{simulate_nfi_timeline, verify_against_oracle, OracleRun};
pub use tables::Technology;

use crate::equation::{invert_throughput, raw_throughput, DEFAULT_RTT_WEIGHT, DEFAULT_SEGMENT_SIZE, T_MBI};
use crate::error::{check, Error, Result};
use crate::loss_history::DEFAULT_WEIGHTS;

const NSS_START: f64 = 10.0;
const NSS_MAX_ITER: u32 = 100;
const GROWTH_MAX_RTTS: u32 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    /// Rate just before the disconnection.
    pub x_d: f64,
    pub r_old: f64,
    pub r_new: f64,
    pub s: f64,
    /// Disconnection length.
    pub t_d: f64,
    /// Loss event rate before the disconnection; derived from `x_d` and `r_old` if absent.
    pub p_r: Option<f64>,
    /// Rate the new link can sustain.
    pub x_max: f64,
    pub q: f64,
    pub t_mbi: f64,
    /// Absolute RTT-convergence margin, seconds.
    pub epsilon: f64,
    pub weights: Vec<f64>,
}

impl ModelInputs {
    pub fn new(x_d: f64, r_old: f64, r_new: f64, t_d: f64, x_max: f64) -> Self {
        Self {
            x_d,
            r_old,
            r_new,
            s: DEFAULT_SEGMENT_SIZE,
            t_d,
            p_r: None,
            x_max,
            q: DEFAULT_RTT_WEIGHT,
            t_mbi: T_MBI,
            epsilon: 0.05 * r_new,
            weights: DEFAULT_WEIGHTS.to_vec(),
        }
    }

    /// A handover between two technologies using their stationary parameters;
    /// the disconnection lasts [`handover_delay`] of the new link.
    pub fn for_handover(from: Technology, to: Technology) -> Self {
        let r_new = to.stationary_rtt();
        Self::new(
            from.stationary_rate(),
            from.stationary_rtt(),
            r_new,
            handover_delay(r_new),
            to.stationary_rate(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        check("X_d", self.x_d, "[s/t_mbi, inf)", self.x_d > 0.0)?;
        check("R_old", self.r_old, "(0, inf)", self.r_old > 0.0)?;
        check("R_new", self.r_new, "(0, inf)", self.r_new > 0.0)?;
        check("s", self.s, "(0, inf)", self.s > 0.0)?;
        check("t_D", self.t_d, "[0, inf)", self.t_d >= 0.0)?;
        check("X_max", self.x_max, "(0, inf)", self.x_max > 0.0)?;
        check("q", self.q, "(0, 1)", self.q > 0.0 && self.q < 1.0)?;
        check("t_mbi", self.t_mbi, "(0, inf)", self.t_mbi > 0.0)?;
        check("epsilon", self.epsilon, "(0, inf)", self.epsilon > 0.0)?;
        check("X_d", self.x_d, "[s/t_mbi, inf)", self.x_d >= self.min_rate())?;
        if let Some(p) = self.p_r {
            check("p_r", p, "(0, 1]", p > 0.0 && p <= 1.0)?;
        }
        if self.weights.is_empty() || self.weights.iter().any(|w| w.is_nan() || *w <= 0.0) {
            return Err(Error::Domain {
                name: "weights",
                value: f64::NAN,
                domain: "non-empty, positive",
            });
        }
        Ok(())
    }

    pub fn min_rate(&self) -> f64 {
        self.s / self.t_mbi
    }

    /// `p_r`, or the loss event rate at which the equation gives `x_d` at `r_old`.
    pub fn loss_rate(&self) -> Result<f64> {
        match self.p_r {
            Some(p) => Ok(p),
            None => Ok(invert_throughput(self.x_d, self.r_old, self.s)?.p),
        }
    }
}

/// Smallest integer `k >= 0` with `2^k >= v`.
pub fn ceil_log2(v: f64) -> u32 {
    if v.is_nan() || v <= 1.0 {
        return 0;
    }
    let mut k = v.log2().ceil().max(0.0) as i32;
    while k > 0 && 2f64.powi(k - 1) >= v {
        k -= 1;
    }
    while 2f64.powi(k) < v {
        k += 1;
    }
    k as u32
}

/// Number of halvings before the rate reaches the `s / t_mbi` floor.
pub fn backoff_halvings(inp: &ModelInputs) -> u32 {
    ceil_log2(inp.x_d * inp.t_mbi / inp.s)
}

/// First NFI whose length is set by the two-packet rule rather than `4R`;
/// `None` when `R >= t_mbi / 2`, where every NFI lasts `4R`.
pub fn timer_switch_index(inp: &ModelInputs) -> Option<u32> {
    (inp.r_old < inp.t_mbi / 2.0).then(|| ceil_log2(2.0 * inp.r_old * inp.x_d / inp.s))
}

/// Sender rate during no-feedback interval `i`.
pub fn rate_during_nfi(i: u32, inp: &ModelInputs) -> f64 {
    rate_with_halvings(i, backoff_halvings(inp), inp)
}

fn rate_with_halvings(i: u32, halvings: u32, inp: &ModelInputs) -> f64 {
    if i < halvings {
        inp.x_d / 2f64.powi(i as i32)
    } else {
        inp.min_rate()
    }
}

/// Length of no-feedback interval `i`.
pub fn nfi_duration(i: u32, inp: &ModelInputs) -> f64 {
    duration_with_halvings(i, backoff_halvings(inp), inp)
}

fn duration_with_halvings(i: u32, halvings: u32, inp: &ModelInputs) -> f64 {
    match timer_switch_index(inp) {
        Some(it) if i >= it => 2.0 * inp.s / rate_with_halvings(i, halvings, inp),
        _ => 4.0 * inp.r_old,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nfi {
    pub index: u32,
    pub start: f64,
    pub rate: f64,
    pub duration: f64,
}

/// Loss accounting over the disconnection.
#[derive(Debug, Clone, PartialEq)]
pub struct Disconnection {
    pub n_lost: u64,
    /// Rate in the NFI during which the link comes back.
    pub x_c: f64,
    /// NFIs that start before the reconnection.
    pub nfis: Vec<Nfi>,
}

/// Closed-form NFI timeline and loss count. Each NFI is the half-open
/// interval `[start, start + duration)`; the one containing `t_D` is
/// truncated pro rata before the single final floor.
pub fn lost_packets(inp: &ModelInputs) -> Disconnection {
    closed_form_timeline(inp, 0)
}

/// [`lost_packets`] with the halving count shifted by `halving_offset`; a
/// nonzero offset yields a deliberately wrong model for negative controls.
pub fn closed_form_timeline(inp: &ModelInputs, halving_offset: i64) -> Disconnection {
    let halvings = (backoff_halvings(inp) as i64 + halving_offset).max(0) as u32;
    let mut nfis = Vec::new();
    let mut acc = 0.0;
    let mut t = 0.0;
    let mut i = 0u32;
    loop {
        let rate = rate_with_halvings(i, halvings, inp);
        let duration = duration_with_halvings(i, halvings, inp);
        nfis.push(Nfi {
            index: i,
            start: t,
            rate,
            duration,
        });
        if inp.t_d < t + duration {
            acc += (inp.t_d - t) * rate / inp.s;
            return Disconnection {
                n_lost: acc.floor() as u64,
                x_c: rate,
                nfis,
            };
        }
        acc += duration * rate / inp.s;
        t += duration;
        i += 1;
    }
}

/// Lower bound on the change of the loss event rate after `delta_n` further
/// packets without loss.
pub fn delta_p_min(delta_n: f64, p_prev: f64, weights: &[f64]) -> f64 {
    let w_tot: f64 = weights.iter().sum();
    w_tot / (weights[0] * delta_n + w_tot / p_prev) - p_prev
}

/// Smoothed RTT `i` samples after the path RTT changed from `r_old` to `r_new`.
pub fn rtt_closed_form(i: u32, r_old: f64, r_new: f64, q: f64) -> f64 {
    let qi = q.powi(i as i32);
    (1.0 - qi) * r_new + qi * r_old
}

/// RTT samples needed before the estimate is within `eps` of `r_new`.
pub fn rtts_to_converge(r_old: f64, r_new: f64, eps: f64, q: f64) -> u32 {
    let gap = (r_old - r_new).abs();
    if eps >= gap {
        return 0;
    }
    ((eps.ln() - gap.ln()) / q.ln()).ceil() as u32
}

/// Equation rate `i` RTTs after reconnection at an unchanged loss event rate.
pub fn rate_after_reconnect(i: u32, inp: &ModelInputs) -> f64 {
    inp.x_d * inp.r_old / rtt_closed_form(i, inp.r_old, inp.r_new, inp.q)
}

/// Mean wait for the first packet after reconnection.
pub fn idle_time(x_c: f64, s: f64) -> f64 {
    s / (2.0 * x_c)
}

/// Time to re-establish the path after a break.
pub fn handover_delay(r_new: f64) -> f64 {
    2.5 + r_new
}

fn nss_gap(n: f64, ratio: f64, q: f64, target: f64) -> f64 {
    ratio * 2f64.powf(n) + (1.0 - ratio) * (2.0 * q).powf(n) - target
}

/// Number of slow-start RTTs needed to climb from `x_c` back to `x_d`: the
/// smallest integer `n` with `a 2^n + (1 - a)(2q)^n >= x_d / x_c`, `a = R_new / R_old`.
pub fn solve_nss(inp: &ModelInputs, x_c: f64) -> Result<u32> {
    let target = inp.x_d / x_c;
    if target <= 1.0 {
        return Ok(0);
    }
    let a = inp.r_new / inp.r_old;
    let q2 = 2.0 * inp.q;
    let f = |n: f64| nss_gap(n, a, inp.q, target);
    let df = |n: f64| a * 2f64.ln() * 2f64.powf(n) + (1.0 - a) * q2.ln() * q2.powf(n);
    // f(0) = 1 - target < 0 and f grows without bound for n >= 0.
    let mut hi = NSS_START;
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let root = newton_raphson(f, df, NSS_START, (0.0, hi), 1e-9, NSS_MAX_ITER).map_err(|_| {
        Error::NonConvergence {
            what: "slow-start length",
            iterations: NSS_MAX_ITER,
        }
    })?;
    let mut n = root.ceil().max(0.0) as u32;
    while n > 0 && f((n - 1) as f64) >= 0.0 {
        n -= 1;
    }
    while f(n as f64) < 0.0 {
        n += 1;
    }
    Ok(n)
}

/// Packets sent during the slow-start RTTs `0..=n_ss`.
pub fn slow_start_packets(inp: &ModelInputs, x_c: f64, n_ss: u32) -> f64 {
    (0..=n_ss)
        .map(|j| {
            let r = rtt_closed_form(j, inp.r_old, inp.r_new, inp.q);
            r * (2f64.powi(j as i32) * x_c).min(rate_after_reconnect(j, inp)) / inp.s
        })
        .sum()
}

/// Capacity left unused while idle and in slow start, assuming the new link
/// sustains `x_d`.
pub fn wasted_capacity(inp: &ModelInputs, x_c: f64, n_ss: u32) -> f64 {
    let idle = idle_time(x_c, inp.s) * inp.x_d;
    let ss: f64 = (0..=n_ss)
        .map(|i| inp.r_new * (inp.x_d - 2f64.powi(i as i32) * x_c).max(0.0))
        .sum();
    (idle + ss) / inp.s
}

/// Time after slow start until the open loss interval outweighs the history
/// and the loss event rate starts to fall.
pub fn recovery_time(inp: &ModelInputs, p_r: f64, n_pkts_ss: f64) -> Result<f64> {
    if p_r.is_nan() || p_r <= 0.0 {
        return Err(Error::NoLossYet);
    }
    Ok((inp.s / inp.x_d * (1.0 / p_r - n_pkts_ss)).max(0.0))
}

/// Further capacity left unused when the new link sustains more than `x_d`.
///
/// The head term covers idle time and slow start at the full gap
/// `x_max - x_d`. After slow start the rate is followed RTT by RTT: capped by
/// the equation at the current loss event rate and RTT estimate and by
/// doubling, with the loss event rate held at `p_r` until the open interval
/// reaches `1 / p_r` and then falling by at most [`delta_p_min`].
pub fn extra_wasted(inp: &ModelInputs, x_c: f64, n_ss: u32, n_pkts_ss: f64, p_r: f64) -> Result<f64> {
    if inp.x_max <= inp.x_d {
        return Ok(0.0);
    }
    let gap = inp.x_max - inp.x_d;
    let mut wasted = gap * (idle_time(x_c, inp.s) + (n_ss as f64 + 1.0) * inp.r_new) / inp.s;

    let stable_interval = 1.0 / p_r;
    let mut x = (2f64.powi(n_ss as i32) * x_c).min(rate_after_reconnect(n_ss, inp));
    let mut n_cum = n_pkts_ss;
    for i in (n_ss + 1)..(n_ss + 1 + GROWTH_MAX_RTTS) {
        let p = if n_cum <= stable_interval {
            p_r
        } else {
            p_r + delta_p_min(n_cum - stable_interval, p_r, &inp.weights)
        };
        let r = rtt_closed_form(i, inp.r_old, inp.r_new, inp.q);
        x = raw_throughput(p, r, inp.s, 4.0 * r).min(2.0 * x);
        if x >= inp.x_max {
            return Ok(wasted);
        }
        wasted += inp.r_new * (inp.x_max - x) / inp.s;
        n_cum += r * x / inp.s;
    }
    Err(Error::NonConvergence {
        what: "rate growth after recovery",
        iterations: GROWTH_MAX_RTTS,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutputs {
    pub n_lost: u64,
    pub x_c: f64,
    pub t_idle: f64,
    pub n_ss: u32,
    pub n_pkts_ss: f64,
    pub n_wasted: f64,
    pub t_recov: f64,
    pub n_wasted_prime: f64,
    pub n_r_eps: u32,
    pub nfi_trace: Vec<Nfi>,
}

impl ModelOutputs {
    /// Wasted capacity in whole packets as tabulated: zero when the new link
    /// is slower than the old rate, else the floor of both terms.
    pub fn wasted_total(&self, inp: &ModelInputs) -> u64 {
        if inp.x_max < inp.x_d {
            0
        } else {
            (self.n_wasted + self.n_wasted_prime).floor() as u64
        }
    }
}

/// Evaluates the whole model. The backoff timeline is checked against the
/// step oracle first; any disagreement is an error.
pub fn full_model(inp: &ModelInputs) -> Result<ModelOutputs> {
    inp.validate()?;
    let n_r_eps = rtts_to_converge(inp.r_old, inp.r_new, inp.epsilon, inp.q);
    if inp.t_d == 0.0 {
        return Ok(ModelOutputs {
            n_lost: 0,
            x_c: inp.x_d,
            t_idle: 0.0,
            n_ss: 0,
            n_pkts_ss: 0.0,
            n_wasted: 0.0,
            t_recov: 0.0,
            n_wasted_prime: 0.0,
            n_r_eps,
            nfi_trace: Vec::new(),
        });
    }
    let disc = verify_against_oracle(inp)?;
    let p_r = inp.loss_rate()?;
    let x_c = disc.x_c;
    let n_ss = solve_nss(inp, x_c)?;
    let n_pkts_ss = slow_start_packets(inp, x_c, n_ss);
    Ok(ModelOutputs {
        n_lost: disc.n_lost,
        x_c,
        t_idle: idle_time(x_c, inp.s),
        n_ss,
        n_pkts_ss,
        n_wasted: wasted_capacity(inp, x_c, n_ss),
        t_recov: recovery_time(inp, p_r, n_pkts_ss)?,
        n_wasted_prime: extra_wasted(inp, x_c, n_ss, n_pkts_ss, p_r)?,
        n_r_eps,
        nfi_trace: disc.nfis,
    })
}
