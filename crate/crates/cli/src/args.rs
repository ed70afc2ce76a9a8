use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tfrc_scenarios::{Technology, Variant};

use crate::seeds::Seeds;

#[derive(Debug, Parser)]
#[command(name = "freeze-tfrc", version, about = "TFRC and Freeze-TFRC across break-before-make handovers")]
pub struct Cli {
    /// Directory for output files. Commands that produce a single table
    /// print it on stdout when this is unset.
    #[arg(long, global = true, env = "FREEZE_TFRC_OUT")]
    pub out: Option<PathBuf>,

    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the closed-form disconnection model.
    Model(ModelArgs),
    /// Check the closed-form backoff against a stepped sender.
    Oracle(OracleArgs),
    /// Run one scenario file on the simulator.
    Sim(SimArgs),
    /// Run the handover matrix over several seeds.
    Sweep(SweepArgs),
    /// Measure TFRC-to-TCP fairness after one handover.
    Fairness(FairnessArgs),
}

fn tech(s: &str) -> Result<Technology, String> {
    s.parse().map_err(|e: tfrc_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// All sixteen technology pairs.
    #[arg(long, conflicts_with_all = ["from", "to"])]
    pub matrix: bool,
    /// Print the matrix as a from-by-to grid of one figure.
    #[arg(long, value_enum, requires = "matrix")]
    pub grid: Option<GridMetric>,
    /// Old technology; fills the inputs from its stationary values.
    #[arg(long, value_parser = tech, requires = "to")]
    pub from: Option<Technology>,
    /// New technology.
    #[arg(long, value_parser = tech, requires = "from")]
    pub to: Option<Technology>,
    /// Rate before the disconnection, bytes/s.
    #[arg(long, allow_negative_numbers = true)]
    pub xd: Option<f64>,
    /// RTT on the old path, seconds.
    #[arg(long, allow_negative_numbers = true)]
    pub rold: Option<f64>,
    /// RTT on the new path, seconds.
    #[arg(long, allow_negative_numbers = true)]
    pub rnew: Option<f64>,
    /// Disconnection length, seconds.
    #[arg(long, allow_negative_numbers = true)]
    pub td: Option<f64>,
    /// RTT smoothing weight.
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// Rate the new path sustains, bytes/s (defaults to the old rate).
    #[arg(long, allow_negative_numbers = true)]
    pub xmax: Option<f64>,
    /// Segment size, bytes.
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    /// Loss event rate before the disconnection.
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// RTT convergence margin, seconds.
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridMetric {
    Lost,
    Wasted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// 10, 54 and 100 Mbit/s by 1 to 100 ms, 60 s disconnections.
    Validation,
    /// Random tuples.
    Fuzz,
    All,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Number of random tuples.
    #[arg(long, default_value_t = 1000)]
    pub tuples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Shift the closed-form halving count by this much (negative control).
    #[arg(long, hide = true, allow_negative_numbers = true)]
    pub inject_fault: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Csv,
    Binary,
    Both,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TraceFormat,
    /// Override the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenario's duration, seconds.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantChoice {
    Standard,
    Freeze,
    Both,
}

impl VariantChoice {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Standard => vec![Variant::Standard],
            VariantChoice::Freeze => vec![Variant::Freeze],
            VariantChoice::Both => Variant::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub variant: VariantChoice,
    /// Seeds: `0..19` (inclusive), `0..=19`, or a comma list.
    #[arg(long, default_value = "0..19")]
    pub seeds: Seeds,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Skip the lone-flow runs that measure losses and wasted capacity.
    #[arg(long)]
    pub no_waste: bool,
    /// Also run each cell against a TCP competitor.
    #[arg(long)]
    pub fairness: bool,
    /// Fail unless Freeze loses nothing and, with both variants, wastes less
    /// than standard TFRC in at least 14 of 16 cells.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct FairnessArgs {
    #[arg(long, value_parser = tech)]
    pub from: Technology,
    #[arg(long, value_parser = tech)]
    pub to: Technology,
    #[arg(long, value_enum, default_value = "freeze")]
    pub variant: VariantChoice,
    #[arg(long, default_value = "0..4")]
    pub seeds: Seeds,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Fail unless every mean ratio lies in [0.5, 2].
    #[arg(long)]
    pub check: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Model(_) => "model",
            Command::Oracle(_) => "oracle",
            Command::Sim(_) => "sim",
            Command::Sweep(_) => "sweep",
            Command::Fairness(_) => "fairness",
        }
    }
}
