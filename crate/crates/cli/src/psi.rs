use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use mbal_core::datagen::{margin_transform, sample_unit_ball};
use mbal_core::metrics::{estimate_near_degeneracy, log_grid, near_degeneracy_from_distances, PsiEstimate};
use mbal_core::polytope::NormKind;
use mbal_core::rng::{self, Role};
use serde::Serialize;

use crate::output::write_csv;
use crate::read_scenario;

#[derive(Debug, Clone, Args)]
pub struct PsiArgs {
    /// Scenario JSON written by `gen`.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Monte Carlo draws.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub b_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b_max: f64,
    /// Number of geometric grid points between `--b-min` and `--b-max`.
    #[arg(long, default_value_t = 30)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instead of the scenario's conditional means, draw costs uniformly in
    /// the unit ball of its cost space and rescale them to margin exponent
    /// KAPPA.
    #[arg(long, value_name = "KAPPA")]
    pub ball_transform: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct PsiMeta {
    problem: String,
    source: String,
    samples: usize,
    kappa_hat: Option<f64>,
    b0_hat: Option<f64>,
    proxy: bool,
}

#[derive(Debug, Serialize)]
struct PsiRow {
    b: f64,
    psi_hat: f64,
}

pub fn estimate(args: &PsiArgs) -> anyhow::Result<(String, PsiEstimate)> {
    if args.samples == 0 {
        bail!("--samples must be positive");
    }
    if !(args.b_min > 0.0 && args.b_max > args.b_min) || args.points < 2 {
        bail!("need 0 < --b-min < --b-max and at least two grid points");
    }
    let scenario = read_scenario(&args.scenario)?;
    let grid = log_grid(args.b_min, args.b_max, args.points);
    let est = match args.ball_transform {
        None => estimate_near_degeneracy(&scenario, &grid, args.samples, args.seed)?,
        Some(kappa) => {
            let poly = scenario.polytope();
            let mut r = rng::stream(args.seed, 0, Role::Diagnostics);
            let mut distances = Vec::with_capacity(args.samples);
            for _ in 0..args.samples {
                let u = sample_unit_ball(&mut r, poly.dim());
                let y = margin_transform(poly, &u, kappa)?;
                distances.push(poly.distance_to_degeneracy(&y, NormKind::L2, None)?);
            }
            near_degeneracy_from_distances(&distances, &grid)?
        }
    };
    Ok((scenario.problem().to_owned(), est))
}

pub fn cmd_psi(args: &PsiArgs) -> anyhow::Result<()> {
    let (problem, est) = estimate(args)?;
    let source = match args.ball_transform {
        Some(kappa) => format!("ball-transform:{kappa}"),
        None => "conditional-mean".to_owned(),
    };
    let meta = PsiMeta {
        problem,
        source,
        samples: est.samples,
        kappa_hat: est.kappa_hat,
        b0_hat: est.b0_hat,
        proxy: est.proxy,
    };
    let rows: Vec<PsiRow> = est.b_grid.iter().zip(&est.psi).map(|(&b, &psi_hat)| PsiRow { b, psi_hat }).collect();
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_csv(BufWriter::new(file), Some(&meta), &["b", "psi_hat"], &rows)?;
    match est.kappa_hat {
        Some(k) => println!("kappa_hat={k:.4} b0_hat={:.4} samples={}", est.b0_hat.unwrap_or(f64::NAN), est.samples),
        None => println!("kappa_hat=undefined (fewer than two grid points with 0 < psi < 1) samples={}", est.samples),
    }
    Ok(())
}
