//! Step-level reference for the disconnection phase: a real [`TfrcSender`]
//! starved of feedback, emitting packets one by one.

use super::{closed_form_timeline, lost_packets, Disconnection, ModelInputs, Nfi};
use crate::error::{Error, Result};
use crate::sender::{SenderConfig, TfrcSender};

/// What the stepped sender did.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub nfis: Vec<Nfi>,
    /// Packets emitted by the end of each NFI, or by `t_D` for the last.
    pub lost_by_nfi: Vec<u64>,
    /// Packets emitted at or before `t_D`.
    pub n_lost: u64,
    pub x_c: f64,
}

/// Runs a sender at `x_d` from `t = 0` with no feedback until `t_D`.
///
/// Packets leave at `s / X` spacing with fractional credit carried across
/// rate changes, so the first one leaves at `s / x_d`. Every emission at or
/// before `t_D` counts as lost.
pub fn simulate_nfi_timeline(inp: &ModelInputs) -> Result<OracleRun> {
    let p_r = inp.loss_rate()?;
    let cfg = SenderConfig {
        s: inp.s,
        q: inp.q,
        t_mbi: inp.t_mbi,
        ..SenderConfig::default()
    };
    let mut sender = TfrcSender::at_rate(cfg, inp.x_d, inp.r_old, p_r, 0.0);
    let mut nfis = Vec::new();
    let mut lost_by_nfi = Vec::new();
    let mut emitted: u64 = 0;
    // Packets' worth of credit accrued up to the start of the current NFI.
    let mut credit = 0.0;
    let mut t = 0.0;
    for index in 0u32.. {
        let rate = sender.x();
        let duration = sender.t_rto();
        nfis.push(Nfi {
            index,
            start: t,
            rate,
            duration,
        });
        let end = t + duration;
        let last = inp.t_d < end;
        let horizon = if last { inp.t_d } else { end };
        loop {
            let k = (emitted + 1) as f64;
            let at = t + (k - credit) * inp.s / rate;
            let inside = if last { at <= horizon } else { at < horizon };
            if !inside {
                break;
            }
            emitted += 1;
        }
        lost_by_nfi.push(emitted);
        if last {
            return Ok(OracleRun {
                nfis,
                lost_by_nfi,
                n_lost: emitted,
                x_c: rate,
            });
        }
        credit += duration * rate / inp.s;
        t += duration;
        sender.on_nofeedback_expiry(t);
    }
    unreachable!("NFI index space exhausted")
}

/// Closed-form disconnection results, after checking each NFI's rate and
/// length and the loss count against the step oracle for exact equality.
pub fn verify_against_oracle(inp: &ModelInputs) -> Result<Disconnection> {
    let closed = lost_packets(inp);
    compare(&closed, &simulate_nfi_timeline(inp)?)?;
    Ok(closed)
}

/// Compares a closed-form timeline (possibly deliberately perturbed, see
/// [`closed_form_timeline`]) against an oracle run.
pub fn compare(closed: &Disconnection, oracle: &OracleRun) -> Result<()> {
    for (i, (c, o)) in closed.nfis.iter().zip(&oracle.nfis).enumerate() {
        for (field, a, b) in [
            ("rate", c.rate, o.rate),
            ("t_RTO", c.duration, o.duration),
            ("start", c.start, o.start),
        ] {
            if a != b {
                return Err(Error::OracleMismatch {
                    index: i,
                    field,
                    closed: a,
                    oracle: b,
                });
            }
        }
    }
    let last = closed.nfis.len().min(oracle.nfis.len()).saturating_sub(1);
    if closed.nfis.len() != oracle.nfis.len() {
        return Err(Error::OracleMismatch {
            index: last,
            field: "NFI count",
            closed: closed.nfis.len() as f64,
            oracle: oracle.nfis.len() as f64,
        });
    }
    if closed.n_lost != oracle.n_lost {
        return Err(Error::OracleMismatch {
            index: last,
            field: "n_lost",
            closed: closed.n_lost as f64,
            oracle: oracle.n_lost as f64,
        });
    }
    Ok(())
}

/// Runs [`compare`] on a timeline whose halving count is shifted by `offset`.
pub fn verify_with_fault(inp: &ModelInputs, offset: i64) -> Result<Disconnection> {
    let closed = closed_form_timeline(inp, offset);
    compare(&closed, &simulate_nfi_timeline(inp)?)?;
    Ok(closed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agrees_on_the_reference_case() {
        let inp = ModelInputs::new(1.27e6, 0.05, 0.05, 3.46, 1.27e6);
        let d = verify_against_oracle(&inp).unwrap();
        assert!(d.n_lost > 1000);
    }

    #[test]
    fn short_disconnection_loses_nothing() {
        let mut inp = ModelInputs::new(1.27e6, 0.05, 0.05, 0.0, 1.27e6);
        inp.t_d = 0.5 * 500.0 / 1.27e6;
        assert_eq!(simulate_nfi_timeline(&inp).unwrap().n_lost, 0);
        assert_eq!(verify_against_oracle(&inp).unwrap().n_lost, 0);
    }

    #[test]
    fn injected_fault_is_caught() {
        let inp = ModelInputs::new(1.27e6, 0.05, 0.05, 300.0, 1.27e6);
        match verify_with_fault(&inp, -1) {
            Err(Error::OracleMismatch { index, .. }) => assert_eq!(index, 17),
            other => panic!("expected a mismatch, got {other:?}"),
        }
    }
}
