//! The closed-form model over one input tuple or the technology matrix.

use std::io::{self, Write};
use std::path::Path;

use anyhow::bail;
use tfrc_core::model::{full_model, ModelInputs, ModelOutputs};
use tfrc_core::Technology;

use crate::args::{GridMetric, ModelArgs};
use crate::output::{emit, SCHEMA};
use crate::Summary;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub pair: Option<(Technology, Technology)>,
    pub inputs: ModelInputs,
    pub outputs: ModelOutputs,
}

impl ModelRow {
    pub fn wasted(&self) -> u64 {
        self.outputs.wasted_total(&self.inputs)
    }
}

pub fn evaluate(pair: Option<(Technology, Technology)>, inputs: ModelInputs) -> anyhow::Result<ModelRow> {
    let outputs = full_model(&inputs)?;
    Ok(ModelRow { pair, inputs, outputs })
}

/// Every (from, to) pair with stationary inputs, rows in technology order.
pub fn matrix() -> anyhow::Result<Vec<ModelRow>> {
    let mut rows = Vec::new();
    for from in Technology::ALL {
        for to in Technology::ALL {
            rows.push(evaluate(Some((from, to)), ModelInputs::for_handover(from, to))?);
        }
    }
    Ok(rows)
}

pub fn write_rows<W: Write + ?Sized>(rows: &[ModelRow], w: &mut W) -> io::Result<()> {
    writeln!(w, "{SCHEMA}")?;
    writeln!(
        w,
        "from,to,x_d,r_old,r_new,t_d,x_max,n_lost,x_c,t_idle,n_ss,n_pkts_ss,n_wasted,t_recov,n_wasted_extra,wasted_total,n_rtt_converge"
    )?;
    for r in rows {
        let (from, to) = r.pair.map_or(("-".into(), "-".into()), |(a, b)| (a.to_string(), b.to_string()));
        let (i, o) = (&r.inputs, &r.outputs);
        writeln!(
            w,
            "{from},{to},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            i.x_d,
            i.r_old,
            i.r_new,
            i.t_d,
            i.x_max,
            o.n_lost,
            o.x_c,
            o.t_idle,
            o.n_ss,
            o.n_pkts_ss,
            o.n_wasted,
            o.t_recov,
            o.n_wasted_prime,
            r.wasted(),
            o.n_r_eps
        )?;
    }
    Ok(())
}

/// One figure of the matrix as a from-by-to grid.
pub fn write_grid<W: Write + ?Sized>(rows: &[ModelRow], metric: GridMetric, w: &mut W) -> io::Result<()> {
    writeln!(w, "{SCHEMA}")?;
    let names: Vec<&str> = Technology::ALL.iter().map(|t| t.name()).collect();
    writeln!(w, "from\\to,{}", names.join(","))?;
    for from in Technology::ALL {
        let cells: Vec<String> = rows
            .iter()
            .filter(|r| r.pair.is_some_and(|(f, _)| f == from))
            .map(|r| match metric {
                GridMetric::Lost => r.outputs.n_lost.to_string(),
                GridMetric::Wasted => r.wasted().to_string(),
            })
            .collect();
        writeln!(w, "{},{}", from.name(), cells.join(","))?;
    }
    Ok(())
}

fn inputs_from_args(a: &ModelArgs) -> anyhow::Result<(Option<(Technology, Technology)>, ModelInputs)> {
    let (pair, mut inp) = match (a.from, a.to) {
        (Some(from), Some(to)) => (Some((from, to)), ModelInputs::for_handover(from, to)),
        _ => {
            let missing: Vec<&str> = [("--xd", a.xd), ("--rold", a.rold), ("--rnew", a.rnew), ("--td", a.td)]
                .iter()
                .filter(|(_, v)| v.is_none())
                .map(|(n, _)| *n)
                .collect();
            if !missing.is_empty() {
                bail!("missing {} (or give --from and --to)", missing.join(", "));
            }
            let x_d = a.xd.unwrap_or_default();
            let r_new = a.rnew.unwrap_or_default();
            (None, ModelInputs::new(x_d, a.rold.unwrap_or_default(), r_new, a.td.unwrap_or_default(), x_d))
        }
    };
    if let Some(v) = a.xd {
        inp.x_d = v;
    }
    if let Some(v) = a.rold {
        inp.r_old = v;
    }
    if let Some(v) = a.rnew {
        inp.r_new = v;
        inp.epsilon = 0.05 * v;
    }
    if let Some(v) = a.td {
        inp.t_d = v;
    }
    if let Some(v) = a.q {
        inp.q = v;
    }
    if let Some(v) = a.xmax {
        inp.x_max = v;
    }
    if let Some(v) = a.s {
        inp.s = v;
    }
    if a.p.is_some() {
        inp.p_r = a.p;
    }
    if let Some(v) = a.eps {
        inp.epsilon = v;
    }
    inp.validate()?;
    Ok((pair, inp))
}

pub fn cmd(a: ModelArgs, out: Option<&Path>) -> anyhow::Result<Summary> {
    let rows = if a.matrix {
        matrix()?
    } else {
        let (pair, inp) = inputs_from_args(&a)?;
        vec![evaluate(pair, inp)?]
    };
    match a.grid {
        Some(g) => emit(out, "model_grid.csv", |w| write_grid(&rows, g, w))?,
        None => emit(out, "model.csv", |w| write_rows(&rows, w))?,
    }
    let lost: u64 = rows.iter().map(|r| r.outputs.n_lost).sum();
    Ok(Summary::new("model").with("rows", rows.len()).with("n_lost_total", lost))
}
