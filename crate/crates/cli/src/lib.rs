//! File-based driver for the margin-based active learner: generate a world,
//! run trials, compare algorithms and estimate the near-degeneracy function.
//!
//! Every subcommand is deterministic given its flags. Randomness flows from a
//! single `--seed` through `(seed, trial, role)` sub-streams, so one trial can
//! be rerun alone and produce the same rows.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod compare;
pub mod gen;
pub mod output;
pub mod psi;
pub mod run;

/// Header line of every CSV written by this tool.
pub const CSV_VERSION_LINE: &str = "# mbal-clo v1";

#[derive(Debug, Parser)]
#[command(name = "mbal-clo", version, about = "Margin-based active learning for contextual linear optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world and write it as JSON.
    Gen(gen::GenArgs),
    /// Run MBAL or supervised trials on a world.
    Run(run::RunArgs),
    /// Build the supervised / MBAL risk-ratio table from results files.
    Compare(compare::CompareArgs),
    /// Estimate the near-degeneracy function of a world.
    Psi(psi::PsiArgs),
}

/// Trials that did not finish, reported after all outputs are written.
#[derive(Debug)]
pub struct TrialFailures {
    pub seed: u64,
    pub failed: Vec<(u64, String)>,
}

impl std::fmt::Display for TrialFailures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{} trial(s) failed:", self.failed.len())?;
        for (trial, msg) in &self.failed {
            writeln!(f, "  --seed {} trial {}: {}", self.seed, trial, msg)?;
        }
        Ok(())
    }
}

impl std::error::Error for TrialFailures {}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(args) => gen::cmd_gen(&args),
        Command::Run(args) => run::cmd_run(&args),
        Command::Compare(args) => compare::cmd_compare(&args),
        Command::Psi(args) => psi::cmd_psi(&args),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_from_args<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    execute(Cli::try_parse_from(args)?)
}

pub(crate) fn read_scenario(path: &PathBuf) -> anyhow::Result<mbal_core::datagen::Scenario> {
    use anyhow::Context;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    mbal_core::datagen::Scenario::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}
