use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use mbal_core::metrics::{risk_ratio, RatioSummary};
use serde::Serialize;

use crate::output::{read_results, write_csv, ResultRow, ResultsMeta};

pub const COMPARE_COLUMNS: [&str; 7] = ["problem", "surrogate", "label_budget", "ratio", "ci_lo", "ci_hi", "trials"];

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Supervised results file; repeat to build several rows.
    #[arg(long, required = true)]
    pub supervised: Vec<PathBuf>,
    /// MBAL results file, paired with `--supervised` in order.
    #[arg(long, required = true)]
    pub mbal: Vec<PathBuf>,
    /// Labels acquired after the warm-up at which risks are compared.
    #[arg(long)]
    pub label_budget: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub problem: String,
    pub surrogate: String,
    pub label_budget: usize,
    pub ratio: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: usize,
}

/// Per-trial excess risk at the first row with `n0 + budget` labels; trials
/// that never reach it are left out.
pub fn risks_at_budget(meta: &ResultsMeta, rows: &[ResultRow], budget: usize) -> (Vec<f64>, usize) {
    let mut per_trial: BTreeMap<u64, Option<f64>> = BTreeMap::new();
    for row in rows {
        let slot = per_trial.entry(row.trial).or_insert(None);
        if slot.is_none() && row.n_labels == meta.n0 + budget {
            *slot = Some(row.excess_spo_risk);
        }
    }
    let risks: Vec<f64> = per_trial.into_values().flatten().collect();
    let missing = (meta.trials as usize).saturating_sub(risks.len());
    (risks, missing)
}

fn compare_pair(sup_path: &Path, mbal_path: &Path, budget: usize) -> anyhow::Result<(CompareRow, RatioSummary)> {
    let (sup_meta, sup_rows) = read_results(sup_path)?;
    let (mbal_meta, mbal_rows) = read_results(mbal_path)?;
    if sup_meta.algo != "supervised" || mbal_meta.algo != "mbal" {
        bail!(
            "expected a supervised and an mbal file, got `{}` and `{}`",
            sup_meta.algo,
            mbal_meta.algo
        );
    }
    if sup_meta.problem != mbal_meta.problem || sup_meta.surrogate != mbal_meta.surrogate || sup_meta.n0 != mbal_meta.n0 {
        bail!(
            "incompatible inputs: {} / {} / n0={} vs {} / {} / n0={}",
            sup_meta.problem,
            sup_meta.surrogate,
            sup_meta.n0,
            mbal_meta.problem,
            mbal_meta.surrogate,
            mbal_meta.n0
        );
    }
    let (sup, sup_missing) = risks_at_budget(&sup_meta, &sup_rows, budget);
    let (act, act_missing) = risks_at_budget(&mbal_meta, &mbal_rows, budget);
    if sup.is_empty() || act.is_empty() {
        bail!("no trial reached {budget} labels after the warm-up in {} or {}", sup_path.display(), mbal_path.display());
    }
    let mut summary = risk_ratio(&sup, &act, budget)?;
    summary.excluded_supervised = sup_missing;
    summary.excluded_mbal = act_missing;
    let row = CompareRow {
        problem: sup_meta.problem,
        surrogate: sup_meta.surrogate,
        label_budget: budget,
        ratio: summary.ratio,
        ci_lo: summary.ci_lo,
        ci_hi: summary.ci_hi,
        trials: summary.trials_supervised.min(summary.trials_mbal),
    };
    Ok((row, summary))
}

pub fn compare_files(supervised: &[PathBuf], mbal: &[PathBuf], budget: usize) -> anyhow::Result<Vec<(CompareRow, RatioSummary)>> {
    if supervised.len() != mbal.len() {
        bail!("--supervised and --mbal must be given the same number of times");
    }
    supervised
        .iter()
        .zip(mbal)
        .map(|(s, m)| compare_pair(s, m, budget).with_context(|| format!("comparing {} with {}", s.display(), m.display())))
        .collect()
}

pub fn cmd_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let table = compare_files(&args.supervised, &args.mbal, args.label_budget)?;
    for (row, s) in &table {
        if s.excluded_supervised + s.excluded_mbal > 0 {
            eprintln!(
                "warning: {} {}: excluded {} supervised and {} mbal trial(s) that never reached {} labels",
                row.problem, row.surrogate, s.excluded_supervised, s.excluded_mbal, row.label_budget
            );
        }
        println!(
            "{} {} @{}: supervised {:.6} mbal {:.6} ratio {} [{}, {}]",
            row.problem, row.surrogate, row.label_budget, s.mean_supervised, s.mean_mbal, row.ratio, row.ci_lo, row.ci_hi
        );
    }
    let rows: Vec<CompareRow> = table.into_iter().map(|(r, _)| r).collect();
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_csv(BufWriter::new(file), None::<&()>, &COMPARE_COLUMNS, &rows)
}
