//! The TCP throughput equation and the small rate-update rules built on it.
//!
//! All rates are in bytes per second, times in seconds and sizes in bytes.

use crate::error::{check, Error, Result};

/// Maximum backoff interval: the sender never goes below one packet per `T_MBI` seconds.
pub const T_MBI: f64 = 64.0;

/// Default segment size.
pub const DEFAULT_SEGMENT_SIZE: f64 = 500.0;

/// Default EWMA weight of the previous RTT estimate.
pub const DEFAULT_RTT_WEIGHT: f64 = 0.9;

/// Nofeedback period used before the first RTT sample.
pub const INITIAL_RTO: f64 = 2.0;

/// Lower bound used when inverting the equation; targets above `T(P_FLOOR)` saturate.
pub const P_FLOOR: f64 = 1e-15;

const INVERSION_ITERATIONS: u32 = 64;

/// `T(p, R)`: the steady-state throughput of a Reno flow seeing loss event rate `p`.
pub fn throughput_equation(p: f64, rtt: f64, s: f64, t_rto: f64) -> Result<f64> {
    check("p", p, "(0, 1]", p > 0.0 && p <= 1.0)?;
    check("R", rtt, "(0, inf)", rtt > 0.0)?;
    check("s", s, "(0, inf)", s > 0.0)?;
    check("t_RTO", t_rto, "(0, inf)", t_rto > 0.0)?;
    Ok(raw_throughput(p, rtt, s, t_rto))
}

/// [`throughput_equation`] with the usual `t_RTO = 4R`.
pub fn throughput(p: f64, rtt: f64, s: f64) -> Result<f64> {
    throughput_equation(p, rtt, s, 4.0 * rtt)
}

#[inline]
pub(crate) fn raw_throughput(p: f64, rtt: f64, s: f64, t_rto: f64) -> f64 {
    let denom = rtt * (2.0 * p / 3.0).sqrt()
        + t_rto * (3.0 * (3.0 * p / 8.0).sqrt()) * p * (1.0 + 32.0 * p * p);
    s / denom
}

/// `X <- max(min(X_Bps, 2 X_recv), s / t_mbi)`.
pub fn update_allowed_rate(x_bps: f64, x_recv: f64, s: f64, t_mbi: f64) -> f64 {
    x_bps.min(2.0 * x_recv).max(s / t_mbi)
}

/// Slow-start doubling, limited by twice the receive rate.
pub fn slow_start_update(x: f64, x_recv: f64) -> f64 {
    (2.0 * x).min(2.0 * x_recv)
}

/// `max(4R, 2s/X)`: the nofeedback timer covers at least two packets.
pub fn nofeedback_period(rtt: f64, s: f64, x: f64) -> f64 {
    (4.0 * rtt).max(2.0 * s / x)
}

/// EWMA RTT update. The first sample replaces the (absent) estimate.
pub fn update_rtt_estimate(estimate: Option<f64>, sample: f64, q: f64) -> f64 {
    match estimate {
        None => sample,
        Some(r) => q * r + (1.0 - q) * sample,
    }
}

/// Result of inverting the throughput equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub p: f64,
    /// The target rate was above `T(P_FLOOR, R)`; `p` is clamped to the floor.
    pub saturated: bool,
}

/// Loss event rate `p` such that `T(p, R) = x_target` (with `t_RTO = 4R`).
///
/// Bisection on `ln p` over `[P_FLOOR, 1]`. Targets at or below `T(1, R)`
/// return `p = 1`.
pub fn invert_throughput(x_target: f64, rtt: f64, s: f64) -> Result<Inversion> {
    check("X_target", x_target, "(0, inf)", x_target > 0.0)?;
    check("R", rtt, "(0, inf)", rtt > 0.0)?;
    check("s", s, "(0, inf)", s > 0.0)?;
    let t = |p: f64| raw_throughput(p, rtt, s, 4.0 * rtt);

    if x_target <= t(1.0) {
        return Ok(Inversion {
            p: 1.0,
            saturated: false,
        });
    }
    if x_target >= t(P_FLOOR) {
        return Ok(Inversion {
            p: P_FLOOR,
            saturated: true,
        });
    }

    // T is strictly decreasing in p: t(lo) > x_target > t(hi).
    let (mut lo, mut hi) = (P_FLOOR.ln(), 0.0_f64);
    for _ in 0..INVERSION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if t(mid.exp()) > x_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = (0.5 * (lo + hi)).exp();
    let rel = (t(p) - x_target).abs() / x_target;
    if rel > 1e-6 {
        return Err(Error::NonConvergence {
            what: "throughput inversion",
            iterations: INVERSION_ITERATIONS,
        });
    }
    Ok(Inversion {
        p,
        saturated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn equation_worked_values() {
        // Frozen from a 40-digit evaluation of the equation.
        let x = throughput_equation(1.0, 1.0, 500.0, 4.0).unwrap();
        assert!(rel(x, 2.054_941_059_381_861) < 1e-12, "{x}");
        let x = throughput_equation(0.01, 0.05, 500.0, 0.2).unwrap();
        assert!(rel(x, 112_332.234_362_993) < 1e-12, "{x}");
    }

    #[test]
    fn linear_in_segment_size() {
        let a = throughput_equation(0.02, 0.1, 500.0, 0.4).unwrap();
        let b = throughput_equation(0.02, 0.1, 1500.0, 0.4).unwrap();
        assert!(rel(b, 3.0 * a) < 1e-14);
    }

    #[test]
    fn zero_loss_is_a_domain_error() {
        assert!(matches!(
            throughput_equation(0.0, 0.1, 500.0, 0.4),
            Err(Error::Domain { name: "p", .. })
        ));
        assert!(throughput_equation(1.5, 0.1, 500.0, 0.4).is_err());
        assert!(throughput_equation(0.1, 0.0, 500.0, 0.4).is_err());
    }

    #[test]
    fn allowed_rate_branches() {
        assert_eq!(update_allowed_rate(1000.0, 400.0, 500.0, T_MBI), 800.0);
        assert_eq!(update_allowed_rate(1000.0, 600.0, 500.0, T_MBI), 1000.0);
        assert_eq!(update_allowed_rate(1.0, 1.0, 500.0, T_MBI), 7.8125);
    }

    #[test]
    fn slow_start_doubles() {
        assert_eq!(slow_start_update(1000.0, 1000.0), 2000.0);
        assert_eq!(slow_start_update(1000.0, 300.0), 600.0);
        let mut x = 125.0;
        for _ in 0..10 {
            x = slow_start_update(x, x);
        }
        assert_eq!(x, 125.0 * 1024.0);
    }

    #[test]
    fn inversion_round_trip_and_boundaries() {
        for p in [1e-4, 1e-2, 0.5] {
            let x = throughput(p, 0.05, 500.0).unwrap();
            let inv = invert_throughput(x, 0.05, 500.0).unwrap();
            assert!(!inv.saturated);
            assert!(rel(inv.p, p) < 1e-6, "p={p} got {}", inv.p);
        }
        let x1 = throughput(1.0, 0.3, 500.0).unwrap();
        assert_eq!(invert_throughput(x1, 0.3, 500.0).unwrap().p, 1.0);

        let inv = invert_throughput(112_332.234_362_993, 0.05, 500.0).unwrap();
        assert!(rel(inv.p, 0.01) < 1e-6);

        let inv = invert_throughput(1e30, 0.05, 500.0).unwrap();
        assert!(inv.saturated);
        assert_eq!(inv.p, P_FLOOR);
        assert!(invert_throughput(0.0, 0.05, 500.0).is_err());
    }

    #[test]
    fn ewma_fixed_point_and_decay() {
        assert_eq!(update_rtt_estimate(Some(1.0), 1.0, 0.9), 1.0);
        assert_eq!(update_rtt_estimate(None, 0.3, 0.9), 0.3);
        let mut r = 1.0;
        for i in 1..=20 {
            r = update_rtt_estimate(Some(r), 0.0, 0.9);
            assert!(rel(r, 0.9_f64.powi(i)) < 1e-12);
        }
    }

    #[test]
    fn nofeedback_period_covers_two_packets() {
        assert_eq!(nofeedback_period(0.05, 500.0, 1.27e6), 0.2);
        assert_eq!(nofeedback_period(0.05, 500.0, 1000.0), 1.0);
    }
}
