//! Side-by-side run of the closed-form backoff and the stepped sender.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfrc_core::model::oracle::{compare, simulate_nfi_timeline};
use tfrc_core::model::{closed_form_timeline, ModelInputs};

use crate::args::{OracleArgs, Suite};
use crate::output::{emit, SCHEMA};
use crate::Summary;

/// Capacities of 10, 54 and 100 Mbit/s by one-way delays of 1 to 100 ms,
/// each sending at capacity into a 60 s disconnection.
pub fn validation_grid() -> Vec<ModelInputs> {
    let mut out = Vec::new();
    for capacity in [10e6, 54e6, 100e6] {
        for delay_ms in 1..=100 {
            let r = 2.0 * delay_ms as f64 / 1000.0;
            out.push(ModelInputs::new(capacity / 8.0, r, r, 60.0, capacity / 8.0));
        }
    }
    out
}

/// Random tuples spanning rates from one packet per 64 s up to about
/// 3 Gbyte/s, RTTs from 1 ms to 50 s and disconnections up to two minutes.
pub fn fuzz_inputs(n: usize, seed: u64) -> Vec<ModelInputs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = rng.gen_range(40.0..1500.0f64).round();
            let x_d = (s / 64.0) * 10f64.powf(rng.gen_range(0.0..6.5));
            let r = 10f64.powf(rng.gen_range(-3.0..1.7));
            let t_d = rng.gen_range(0.0..120.0);
            let mut inp = ModelInputs::new(x_d, r, r, t_d, x_d);
            inp.s = s;
            inp
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub case: usize,
    pub error: tfrc_core::Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub cases: usize,
    pub nfis: usize,
    pub divergence: Option<Divergence>,
}

/// Compares every case, writing one row per NFI until the first divergence.
/// `fault` shifts the closed-form halving count.
pub fn check<W: Write + ?Sized>(cases: &[ModelInputs], fault: i64, w: &mut W) -> anyhow::Result<OracleReport> {
    writeln!(w, "{SCHEMA}")?;
    writeln!(w, "case,nfi,start,rate,t_rto,lost_to_date,n_lost")?;
    let mut nfis = 0;
    for (case, inp) in cases.iter().enumerate() {
        let closed = closed_form_timeline(inp, fault);
        let oracle = simulate_nfi_timeline(inp)?;
        if let Err(error) = compare(&closed, &oracle) {
            return Ok(OracleReport {
                cases: case,
                nfis,
                divergence: Some(Divergence { case, error }),
            });
        }
        for (nfi, lost) in closed.nfis.iter().zip(&oracle.lost_by_nfi) {
            writeln!(
                w,
                "{case},{},{},{},{},{lost},{}",
                nfi.index, nfi.start, nfi.rate, nfi.duration, closed.n_lost
            )?;
        }
        nfis += closed.nfis.len();
    }
    Ok(OracleReport {
        cases: cases.len(),
        nfis,
        divergence: None,
    })
}

pub fn cmd(a: OracleArgs, out: Option<&Path>) -> anyhow::Result<Summary> {
    let mut cases = Vec::new();
    if matches!(a.suite, Suite::Validation | Suite::All) {
        cases.extend(validation_grid());
    }
    if matches!(a.suite, Suite::Fuzz | Suite::All) {
        cases.extend(fuzz_inputs(a.tuples, a.seed));
    }
    let mut report = None;
    emit(out, "oracle.csv", |w| {
        report = Some(check(&cases, a.inject_fault.unwrap_or(0), w).map_err(std::io::Error::other)?);
        Ok(())
    })?;
    let report = report.expect("report is set by the writer");
    let mut s = Summary::new("oracle").with("cases", report.cases).with("nfis", report.nfis);
    if let Some(d) = report.divergence {
        s.pass = false;
        let index = match d.error {
            tfrc_core::Error::OracleMismatch { index, .. } => index.to_string(),
            _ => "-".into(),
        };
        log::error!("case {}: {}", d.case, d.error);
        s = s.with("failed_case", d.case).with("first_divergent_nfi", index);
    }
    Ok(s)
}
