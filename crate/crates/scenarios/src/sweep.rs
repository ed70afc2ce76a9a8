//! The technology matrix across seeds, run in parallel.

use std::io::Write;

use rayon::prelude::*;
use tfrc_core::Technology;

use crate::error::Result;
use crate::handover::{run_handover, Horizon, Lab, RENO_FLOW, TFRC_FLOW};
use crate::metrics::{fairness_ratio, measure_losses, measure_wasted};
use crate::profile::Variant;

/// One (variant, from, to, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub variant: Variant,
    pub from: Technology,
    pub to: Technology,
    pub seed: u64,
    pub n_lost: u64,
    pub n_wasted: f64,
    pub fairness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// Measure losses and wasted capacity on a lone flow.
    pub waste: bool,
    /// Also run against a Reno competitor and measure the goodput ratio.
    pub fairness: bool,
}

fn cells(variants: &[Variant], seeds: &[u64]) -> Vec<(Variant, Technology, Technology, u64)> {
    let mut out = Vec::new();
    for &v in variants {
        for from in Technology::ALL {
            for to in Technology::ALL {
                for &seed in seeds {
                    out.push((v, from, to, seed));
                }
            }
        }
    }
    out
}

/// Runs one cell and seed.
pub fn run_cell(
    lab: &Lab,
    variant: Variant,
    from: Technology,
    to: Technology,
    seed: u64,
    opts: SweepOptions,
) -> Result<RunRow> {
    let mut row = RunRow {
        variant,
        from,
        to,
        seed,
        n_lost: 0,
        n_wasted: 0.0,
        fairness: None,
    };
    if opts.waste {
        let run = run_handover(lab, from, to, variant, seed, false, Horizon::Settled)?;
        row.n_lost = measure_losses(&run.trace, TFRC_FLOW)?;
        row.n_wasted = measure_wasted(&run.trace, TFRC_FLOW, run.x_ref)?.packets;
    }
    if opts.fairness {
        let run = run_handover(lab, from, to, variant, seed, true, Horizon::Fairness)?;
        row.fairness = Some(fairness_ratio(&run.trace, TFRC_FLOW, RENO_FLOW)?);
    }
    Ok(row)
}

/// Runs every cell for every seed on the current rayon pool. Rows come back
/// ordered by (variant, from, to, seed) whatever the completion order.
pub fn sweep(lab: &Lab, variants: &[Variant], seeds: &[u64], opts: SweepOptions) -> Vec<Result<RunRow>> {
    cells(variants, seeds)
        .into_par_iter()
        .map(|(v, from, to, seed)| run_cell(lab, v, from, to, seed, opts))
        .collect()
}

/// Seed-averaged results for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub variant: Variant,
    pub from: Technology,
    pub to: Technology,
    pub runs: usize,
    pub n_lost: f64,
    pub n_wasted: f64,
    pub fairness: Option<f64>,
}

/// Folds rows (in seed order) into per-cell means.
pub fn aggregate(rows: &[RunRow]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    let mut fair_n: Vec<usize> = Vec::new();
    for r in rows {
        let i = match out
            .iter()
            .position(|c| (c.variant, c.from, c.to) == (r.variant, r.from, r.to))
        {
            Some(i) => i,
            None => {
                out.push(CellSummary {
                    variant: r.variant,
                    from: r.from,
                    to: r.to,
                    runs: 0,
                    n_lost: 0.0,
                    n_wasted: 0.0,
                    fairness: None,
                });
                fair_n.push(0);
                out.len() - 1
            }
        };
        let c = &mut out[i];
        c.runs += 1;
        c.n_lost += r.n_lost as f64;
        c.n_wasted += r.n_wasted;
        if let Some(f) = r.fairness {
            c.fairness = Some(c.fairness.unwrap_or(0.0) + f);
            fair_n[i] += 1;
        }
    }
    for (c, n) in out.iter_mut().zip(fair_n) {
        c.n_lost /= c.runs as f64;
        c.n_wasted /= c.runs as f64;
        c.fairness = c.fairness.map(|f| f / n as f64);
    }
    out
}

pub fn write_rows<W: Write>(rows: &[RunRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "#schema v1")?;
    writeln!(w, "variant,from,to,seed,n_lost,n_wasted,fairness")?;
    for r in rows {
        let fair = r.fairness.map(|f| format!("{f:.4}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{:.2},{}",
            r.variant, r.from, r.to, r.seed, r.n_lost, r.n_wasted, fair
        )?;
    }
    Ok(())
}

/// Which per-cell figure a matrix shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Lost,
    Wasted,
    Fairness,
}

/// A from-by-to matrix of one figure for one variant, rows and columns in
/// technology order.
pub fn write_matrix<W: Write>(
    cells: &[CellSummary],
    variant: Variant,
    metric: Metric,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "#schema v1")?;
    let names: Vec<&str> = Technology::ALL.iter().map(|t| t.name()).collect();
    writeln!(w, "from\\to,{}", names.join(","))?;
    for from in Technology::ALL {
        let vals: Vec<String> = Technology::ALL
            .iter()
            .map(|&to| {
                cells
                    .iter()
                    .find(|c| (c.variant, c.from, c.to) == (variant, from, to))
                    .and_then(|c| match metric {
                        Metric::Lost => Some(format!("{:.2}", c.n_lost)),
                        Metric::Wasted => Some(format!("{:.2}", c.n_wasted)),
                        Metric::Fairness => c.fairness.map(|f| format!("{f:.2}")),
                    })
                    .unwrap_or_default()
            })
            .collect();
        writeln!(w, "{},{}", from.name(), vals.join(","))?;
    }
    Ok(())
}
