//! Commands behind the `freeze-tfrc` binary. Each returns a [`Summary`]
//! that the binary prints on stderr and turns into an exit code.

pub mod args;
pub mod model;
pub mod oracle;
pub mod output;
pub mod runs;
pub mod seeds;

use std::fmt::Display;

pub use args::{Cli, Command};

/// Machine-readable outcome of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub command: &'static str,
    pub pass: bool,
    pub fields: Vec<(&'static str, String)>,
}

impl Summary {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            pass: true,
            fields: Vec::new(),
        }
    }

    pub fn with(mut self, key: &'static str, value: impl Display) -> Self {
        self.fields.push((key, value.to_string()));
        self
    }

    /// `summary command=<name> status=<pass|fail> key=value ...`
    pub fn line(&self) -> String {
        let mut s = format!(
            "summary command={} status={}",
            self.command,
            if self.pass { "pass" } else { "fail" }
        );
        for (k, v) in &self.fields {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

pub fn run(cli: Cli) -> anyhow::Result<Summary> {
    let out = cli.out;
    match cli.command {
        Command::Model(a) => model::cmd(a, out.as_deref()),
        Command::Oracle(a) => oracle::cmd(a, out.as_deref()),
        Command::Sim(a) => runs::cmd_sim(a, out.as_deref()),
        Command::Sweep(a) => runs::cmd_sweep(a, out.as_deref()),
        Command::Fairness(a) => runs::cmd_fairness(a, out.as_deref()),
    }
}
