use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use mbal_core::datagen::{
    gen_pricing_scenario, gen_shortest_path_scenario, DegeneracyThreshold, PricingParams, Scenario, ShortestPathParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    ShortestPath,
    Pricing,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub problem: Problem,
    /// Nodes per side of the shortest-path grid.
    #[arg(long, default_value_t = 3)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Label noise level; defaults to 0.5 (shortest path) or 0.1 (pricing).
    #[arg(long)]
    pub eps_bar: Option<f64>,
    /// Variance of each shortest-path mixture component.
    #[arg(long, default_value_t = 1.0 / 9.0)]
    pub sigma_m2: f64,
    /// Polynomial degree of the shortest-path cost model.
    #[arg(long, default_value_t = 1)]
    pub deg: u32,
    /// Centers must sit at least this fraction of `||E[c|mu]||` from degeneracy.
    #[arg(long, default_value_t = 0.1, conflicts_with = "threshold_abs")]
    pub threshold_factor: f64,
    /// Absolute center threshold instead of the relative one.
    #[arg(long)]
    pub threshold_abs: Option<f64>,
    /// Standard deviation of the pricing features around each center.
    #[arg(long, default_value_t = 0.01)]
    pub feature_sd: f64,
    /// Draw one pricing noise factor per item instead of per (item, price).
    #[arg(long)]
    pub shared_item_noise: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn build_scenario(args: &GenArgs) -> anyhow::Result<Scenario> {
    let scenario = match args.problem {
        Problem::ShortestPath => {
            let threshold = match args.threshold_abs {
                Some(value) => DegeneracyThreshold::Absolute { value },
                None => DegeneracyThreshold::Relative {
                    factor: args.threshold_factor,
                },
            };
            let params = ShortestPathParams {
                k: args.grid,
                deg: args.deg,
                sigma_m2: args.sigma_m2,
                eps_bar: args.eps_bar.unwrap_or(ShortestPathParams::default().eps_bar),
                threshold,
                ..ShortestPathParams::default()
            };
            Scenario::ShortestPath(gen_shortest_path_scenario(args.seed, params)?)
        }
        Problem::Pricing => {
            let params = PricingParams {
                feature_sd: args.feature_sd,
                eps_bar: args.eps_bar.unwrap_or(PricingParams::default().eps_bar),
                shared_item_noise: args.shared_item_noise,
            };
            Scenario::Pricing(gen_pricing_scenario(args.seed, params)?)
        }
    };
    Ok(scenario)
}

pub fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    let scenario = build_scenario(args).context("generating scenario")?;
    let mut json = scenario.to_json()?;
    json.push('\n');
    std::fs::write(&args.out, json).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{}: d={} vertices={} centers={} min_center_nu={:.6}",
        scenario.problem(),
        scenario.cost_dim(),
        scenario.polytope().num_vertices(),
        scenario.centers().len(),
        scenario.min_center_margin()
    );
    Ok(())
}
