//! Simulator-backed commands: single scenarios, matrix sweeps, fairness.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use tfrc_scenarios::{
    aggregate, fairness_ratio, run_handover, sweep, write_matrix, write_rows, Horizon, Lab, Metric, RunRow,
    SweepOptions, Variant, RENO_FLOW, TFRC_FLOW,
};
use tfrc_simnet::{run_scenario, Action, FlowKind, RecordKind, Scenario, ScriptEvent};

use rayon::prelude::*;

use crate::args::{FairnessArgs, SimArgs, SweepArgs, TraceFormat};
use crate::output::{create, dir_or_cwd, write_goodput, write_rates, SCHEMA};
use crate::Summary;

/// Cells in which Freeze must waste less than standard TFRC.
pub const WASTE_BETTER_MIN: usize = 14;

fn pool(jobs: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        anyhow::ensure!(n > 0, "--jobs must be at least 1");
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

/// A scenario that starts no flow gets one plain TFRC flow at time zero.
pub fn with_default_flow(mut sc: Scenario) -> Scenario {
    if !sc.events.iter().any(|e| matches!(e.action, Action::StartFlow { .. })) {
        sc.events.insert(
            0,
            ScriptEvent {
                t: 0.0,
                action: Action::StartFlow { kind: FlowKind::Tfrc },
            },
        );
    }
    sc
}

pub fn cmd_sim(a: SimArgs, out: Option<&Path>) -> anyhow::Result<Summary> {
    let text = std::fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario.display()))?;
    let mut sc = Scenario::from_toml(&text).with_context(|| format!("in {}", a.scenario.display()))?;
    if let Some(seed) = a.seed {
        sc.seed = seed;
    }
    if let Some(d) = a.duration {
        sc.duration = d;
    }
    let sc = with_default_flow(sc);
    let trace = run_scenario(&sc)?;

    let dir = dir_or_cwd(out);
    if matches!(a.format, TraceFormat::Csv | TraceFormat::Both) {
        let mut w = create(&dir, "trace.csv")?;
        trace.write_csv(&mut w)?;
        w.flush()?;
    }
    if matches!(a.format, TraceFormat::Binary | TraceFormat::Both) {
        let mut w = create(&dir, "trace.bin")?;
        trace.write_binary(&mut w)?;
        w.flush()?;
    }
    let mut w = create(&dir, "rates.csv")?;
    write_rates(&trace, &mut w)?;
    w.flush()?;
    let mut w = create(&dir, "goodput.csv")?;
    write_goodput(&trace, &mut w)?;
    w.flush()?;

    let sum = |f: fn(&tfrc_simnet::FlowStats) -> u64| trace.flows.iter().map(f).sum::<u64>();
    Ok(Summary::new("sim")
        .with("flows", trace.flows.len())
        .with("sent", sum(|s| s.sent))
        .with("delivered", sum(|s| s.delivered))
        .with("dropped_queue", sum(|s| s.dropped_queue))
        .with("dropped_disconnected", sum(|s| s.dropped_disconnected))
        .with("outages", trace.outages().len())
        .with("dir", dir.display()))
}

/// Freeze cells that lost packets, and cells where Freeze wasted less than
/// standard TFRC out of those with both variants.
pub fn sweep_checks(rows: &[RunRow]) -> (usize, usize, usize) {
    let cells = aggregate(rows);
    let lossy = cells.iter().filter(|c| c.variant == Variant::Freeze && c.n_lost > 0.0).count();
    let mut better = 0;
    let mut compared = 0;
    for f in cells.iter().filter(|c| c.variant == Variant::Freeze) {
        if let Some(s) = cells
            .iter()
            .find(|c| c.variant == Variant::Standard && (c.from, c.to) == (f.from, f.to))
        {
            compared += 1;
            if f.n_wasted < s.n_wasted {
                better += 1;
            }
        }
    }
    (lossy, better, compared)
}

pub fn cmd_sweep(a: SweepArgs, out: Option<&Path>) -> anyhow::Result<Summary> {
    let variants = a.variant.variants();
    let opts = SweepOptions {
        waste: !a.no_waste,
        fairness: a.fairness,
    };
    anyhow::ensure!(opts.waste || opts.fairness, "nothing to measure: --no-waste without --fairness");
    let lab = Lab::new();
    let results = pool(a.jobs)?.install(|| sweep(&lab, &variants, &a.seeds.0, opts));

    // Keep every row up to the first failure so partial results survive.
    let mut rows = Vec::new();
    let mut failure = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let dir = dir_or_cwd(out);
    let mut w = create(&dir, "runs.csv")?;
    write_rows(&rows, &mut w)?;
    w.flush()?;
    if let Some(e) = failure {
        return Err(anyhow::Error::new(e).context(format!("sweep aborted after {} runs", rows.len())));
    }
    let cells = aggregate(&rows);
    for &v in &variants {
        let mut metrics = Vec::new();
        if opts.waste {
            metrics.extend([(Metric::Lost, "lost"), (Metric::Wasted, "wasted")]);
        }
        if opts.fairness {
            metrics.push((Metric::Fairness, "fairness"));
        }
        for (m, name) in metrics {
            let mut w = create(&dir, &format!("{name}_{v}.csv"))?;
            write_matrix(&cells, v, m, &mut w)?;
            w.flush()?;
        }
    }

    let mut s = Summary::new("sweep").with("runs", rows.len()).with("dir", dir.display());
    if opts.waste {
        let (lossy, better, compared) = sweep_checks(&rows);
        if variants.contains(&Variant::Freeze) {
            s = s.with("freeze_lossy_cells", lossy);
        }
        if compared > 0 {
            s = s.with("freeze_wastes_less", format!("{better}/{compared}"));
        }
        if a.check {
            s.pass = lossy == 0 && (compared == 0 || better >= WASTE_BETTER_MIN.min(compared));
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessRun {
    pub variant: Variant,
    pub seed: u64,
    pub ratio: f64,
}

pub fn cmd_fairness(a: FairnessArgs, out: Option<&Path>) -> anyhow::Result<Summary> {
    let lab = Lab::new();
    let jobs: Vec<(Variant, u64)> = a
        .variant
        .variants()
        .into_iter()
        .flat_map(|v| a.seeds.0.iter().map(move |&s| (v, s)))
        .collect();
    let dir = dir_or_cwd(out);
    let runs: Vec<anyhow::Result<FairnessRun>> = pool(a.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(variant, seed)| {
                let run = run_handover(&lab, a.from, a.to, variant, seed, true, Horizon::Fairness)?;
                let ratio = fairness_ratio(&run.trace, TFRC_FLOW, RENO_FLOW)?;
                let mut w = create(&dir, &format!("rates_{variant}_seed{seed}.csv"))?;
                write_rates(&run.trace, &mut w)?;
                w.flush()?;
                let mut w = create(&dir, &format!("goodput_{variant}_seed{seed}.csv"))?;
                write_goodput(&run.trace, &mut w)?;
                w.flush()?;
                Ok(FairnessRun { variant, seed, ratio })
            })
            .collect()
    });
    let runs: Vec<FairnessRun> = runs.into_iter().collect::<anyhow::Result<_>>()?;

    let mut w = create(&dir, "fairness.csv")?;
    writeln!(w, "{SCHEMA}")?;
    writeln!(w, "variant,from,to,seed,ratio")?;
    for r in &runs {
        writeln!(w, "{},{},{},{},{:.4}", r.variant, a.from, a.to, r.seed, r.ratio)?;
    }
    w.flush()?;

    let mut s = Summary::new("fairness").with("from", a.from).with("to", a.to);
    for v in a.variant.variants() {
        let rs: Vec<f64> = runs.iter().filter(|r| r.variant == v).map(|r| r.ratio).collect();
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        println!("{v} {} -> {}: mean ratio {mean:.2} over {} seeds", a.from, a.to, rs.len());
        if a.check && !(0.5..=2.0).contains(&mean) {
            s.pass = false;
        }
        s = s.with(if v == Variant::Freeze { "freeze_ratio" } else { "standard_ratio" }, format!("{mean:.3}"));
    }
    Ok(s.with("dir", dir.display()))
}

/// Data packets of every flow lost to disconnections.
pub fn disconnection_drops(trace: &tfrc_simnet::Trace) -> usize {
    trace.of_kind(RecordKind::DropDisconnected).count()
}
