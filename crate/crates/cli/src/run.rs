use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use mbal_core::datagen::Scenario;
use mbal_core::losses::SurrogateKind;
use mbal_core::mbal::{run_stream, run_supervised, EvalCadence, MbalConfig, RunOptions, TrialTrace, DEFAULT_SCHEDULE_EXPONENT};
use mbal_core::metrics::TestSet;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{write_csv, ResultRow, ResultsMeta, RESULT_COLUMNS};
use crate::{read_scenario, TrialFailures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Mbal,
    Supervised,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Mbal => "mbal",
            Algo::Supervised => "supervised",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario JSON written by `gen`.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Mbal)]
    pub algo: Algo,
    /// spo, spo+, squared, mae, huber or huber:<delta>.
    #[arg(long, default_value = "spo+")]
    pub surrogate: SurrogateKind,
    #[arg(long, default_value_t = 1e-5)]
    pub p_tilde: f64,
    #[arg(long, default_value_t = 0.5)]
    pub q_tilde: f64,
    /// Warm-up length n0.
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    /// Iterations after the warm-up.
    #[arg(long = "T", default_value_t = 1000)]
    pub iterations: usize,
    /// Stop a trial once this many labels were bought after the warm-up.
    #[arg(long)]
    pub label_budget: Option<usize>,
    #[arg(long, default_value_t = 25)]
    pub trials: u64,
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; trials are independent.
    #[arg(long, env = "MBAL_JOBS")]
    pub jobs: Option<usize>,
    /// Trainer step size (default depends on the world and surrogate).
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Descent epochs per refit.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Descend on standardized features.
    #[arg(long)]
    pub standardize: Option<bool>,
    #[arg(long, default_value_t = DEFAULT_SCHEDULE_EXPONENT, allow_hyphen_values = true)]
    pub schedule_exponent: f64,
    /// Evaluate every N iterations instead of after every label.
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary JSON with the configuration echo and per-trial totals.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Add wall-clock seconds to the summary (makes it run-dependent).
    #[arg(long)]
    pub record_timing: bool,
}

impl RunArgs {
    pub fn config(&self, scenario: &Scenario) -> anyhow::Result<MbalConfig> {
        let mut trainer = scenario.default_trainer(self.surrogate);
        if let Some(s) = self.step_size {
            trainer.step_size = s;
        }
        if let Some(e) = self.epochs {
            trainer.epochs_per_update = e;
        }
        if let Some(flag) = self.standardize {
            trainer.standardize = flag;
        }
        let cfg = MbalConfig {
            p_tilde: self.p_tilde,
            q_tilde: self.q_tilde,
            n0: self.warmup,
            surrogate: self.surrogate,
            trainer,
            seed: self.seed,
            schedule_exponent: self.schedule_exponent,
            eval_cadence: match self.eval_every {
                Some(0) => bail!("--eval-every must be positive"),
                Some(n) => EvalCadence::Every(n),
                None => EvalCadence::OnLabel,
            },
            ..MbalConfig::default()
        };
        cfg.validate()?;
        if self.trials == 0 {
            bail!("--trials must be at least 1");
        }
        if self.test_size == 0 {
            bail!("--test-size must be at least 1");
        }
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
struct TrialSummary {
    trial: u64,
    iterations: usize,
    final_labels: usize,
    oracle_calls: usize,
    b0: f64,
    final_excess_spo_risk: Option<f64>,
    heuristic: bool,
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    scenario: String,
    problem: &'a str,
    algo: Algo,
    iterations: usize,
    label_budget: Option<usize>,
    trials: u64,
    test_size: usize,
    config: &'a MbalConfig,
    completed: Vec<TrialSummary>,
    failed_trials: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_clock_seconds: Option<f64>,
}

/// Runs one trial. The test set and the data stream depend only on
/// `(seed, trial)`, so both algorithms see the same samples.
pub fn run_trial(args: &RunArgs, cfg: &MbalConfig, scenario: &Scenario, trial: u64) -> mbal_core::Result<TrialTrace> {
    let test = TestSet::for_trial(scenario, args.test_size, cfg.seed, trial)?;
    let opts = RunOptions {
        iterations: args.iterations,
        label_budget: args.label_budget,
        trial,
    };
    match args.algo {
        Algo::Mbal => run_stream(cfg, scenario, &opts, &test),
        Algo::Supervised => run_supervised(cfg, scenario, &opts, &test),
    }
}

fn rows_of(trace: &TrialTrace) -> impl Iterator<Item = ResultRow> + '_ {
    trace.records.iter().filter_map(move |r| {
        Some(ResultRow {
            trial: trace.trial,
            t: r.t,
            n_labels: r.n_labels,
            excess_spo_risk: r.excess_spo_risk_test?,
            surrogate_risk: r.surrogate_risk_test?,
            b_t: r.b,
            labeled_flag: r.labeled as u8,
        })
    })
}

pub fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let scenario = read_scenario(&args.scenario)?;
    let cfg = args.config(&scenario)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        pool = pool.num_threads(jobs.max(1));
    }
    let pool = pool.build().context("starting worker pool")?;
    let outcomes: Vec<(u64, mbal_core::Result<TrialTrace>)> = pool.install(|| {
        (0..args.trials)
            .into_par_iter()
            .map(|trial| (trial, run_trial(args, &cfg, &scenario, trial)))
            .collect()
    });

    let mut rows = Vec::new();
    let mut completed = Vec::new();
    let mut failed = Vec::new();
    for (trial, outcome) in outcomes {
        match outcome {
            Ok(trace) => {
                rows.extend(rows_of(&trace));
                completed.push(TrialSummary {
                    trial,
                    iterations: trace.records.last().map_or(0, |r| r.t),
                    final_labels: trace.final_labels(),
                    oracle_calls: trace.oracle_calls,
                    b0: trace.b0,
                    final_excess_spo_risk: trace.records.last().and_then(|r| r.excess_spo_risk_test),
                    heuristic: trace.heuristic,
                });
            }
            Err(e) => failed.push((trial, e.to_string())),
        }
    }

    let meta = ResultsMeta {
        problem: scenario.problem().to_owned(),
        algo: args.algo.name().to_owned(),
        surrogate: args.surrogate.to_string(),
        n0: cfg.n0,
        seed: cfg.seed,
        trials: args.trials,
    };
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_csv(BufWriter::new(file), Some(&meta), &RESULT_COLUMNS, &rows)?;

    if let Some(path) = &args.summary {
        let summary = RunSummary {
            scenario: args.scenario.display().to_string(),
            problem: scenario.problem(),
            algo: args.algo,
            iterations: args.iterations,
            label_budget: args.label_budget,
            trials: args.trials,
            test_size: args.test_size,
            config: &cfg,
            completed,
            failed_trials: failed.iter().map(|f| f.0).collect(),
            wall_clock_seconds: args.record_timing.then(|| started.elapsed().as_secs_f64()),
        };
        let mut json = serde_json::to_string_pretty(&summary)?;
        json.push('\n');
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }

    if !failed.is_empty() {
        return Err(TrialFailures { seed: cfg.seed, failed }.into());
    }
    Ok(())
}
