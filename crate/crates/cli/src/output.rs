//! Files written by the commands. Every table starts with a schema line.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use tfrc_simnet::Trace;

pub const SCHEMA: &str = "#schema v1";

/// Creates `dir/name`, making `dir` if needed.
pub fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Where files go when a command always writes some: `--out`, else the
/// working directory.
pub fn dir_or_cwd(out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

/// Writes one table to `dir/name`, or to stdout when `dir` is unset.
pub fn emit(
    out: Option<&Path>,
    name: &str,
    write: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            let mut w = create(dir, name)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Sending-rate steps per flow, for plotting.
pub fn write_rates<W: Write + ?Sized>(trace: &Trace, w: &mut W) -> io::Result<()> {
    writeln!(w, "{SCHEMA}")?;
    writeln!(w, "t,flow,kind,rate")?;
    for (id, kind) in trace.flow_kinds.iter().enumerate() {
        for (t, x) in trace.rate_steps(id) {
            writeln!(w, "{t},{id},{},{x}", kind_name(*kind))?;
        }
    }
    Ok(())
}

/// Delivered bytes per flow per second, for plotting.
pub fn write_goodput<W: Write + ?Sized>(trace: &Trace, w: &mut W) -> io::Result<()> {
    writeln!(w, "{SCHEMA}")?;
    writeln!(w, "second,flow,kind,bytes")?;
    for (id, (stats, kind)) in trace.flows.iter().zip(&trace.flow_kinds).enumerate() {
        for (sec, bytes) in stats.goodput_bins.iter().enumerate() {
            writeln!(w, "{sec},{id},{},{bytes}", kind_name(*kind))?;
        }
    }
    Ok(())
}

fn kind_name(kind: tfrc_simnet::FlowKind) -> &'static str {
    match kind {
        tfrc_simnet::FlowKind::Tfrc => "tfrc",
        tfrc_simnet::FlowKind::Freeze => "freeze",
        tfrc_simnet::FlowKind::Reno => "reno",
    }
}
