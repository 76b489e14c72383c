//! Risk evaluation against the known conditional mean, near-degeneracy
//! estimates and supervised-versus-active risk ratios.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Scenario;
use crate::error::{check_dim, Error, Result};
use crate::hypothesis::LinearPredictor;
use crate::losses::{loss_with_grad, LabeledSample, SurrogateKind};
use crate::mbal::TrialTrace;
use crate::polytope::{dot, NormKind, Polytope};
use crate::rng::{self, Role};

/// Held-out samples together with their conditional means and the optimal
/// objective value of each mean.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub samples: Vec<LabeledSample>,
    pub means: Vec<Vec<f64>>,
    optimal_values: Vec<f64>,
}

impl TestSet {
    pub fn draw<R: Rng + ?Sized>(scenario: &Scenario, size: usize, rng: &mut R) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidInput("test set must not be empty".into()));
        }
        let samples: Vec<LabeledSample> = (0..size).map(|_| scenario.sample(rng)).collect();
        let means = samples.iter().map(|s| scenario.mean_unchecked(&s.x)).collect();
        Ok(Self::with_means(scenario.polytope(), samples, means))
    }

    /// Test set of the given trial, drawn from its own sub-stream.
    pub fn for_trial(scenario: &Scenario, size: usize, seed: u64, trial: u64) -> Result<Self> {
        Self::draw(scenario, size, &mut rng::stream(seed, trial, Role::Test))
    }

    pub fn with_means(poly: &Polytope, samples: Vec<LabeledSample>, means: Vec<Vec<f64>>) -> Self {
        let optimal_values = means.iter().map(|m| poly.argmin(m).value).collect();
        TestSet {
            samples,
            means,
            optimal_values,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `E[c|x].(w*(h(x)) - w*(E[c|x]))` over the test features.
    pub fn excess_spo_risk(&self, h: &LinearPredictor, poly: &Polytope) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::InvalidInput("empty test set".into()));
        }
        check_dim(poly.dim(), h.output_dim())?;
        let mut c_hat = vec![0.0; poly.dim()];
        let mut total = 0.0;
        for ((s, mean), opt) in self.samples.iter().zip(&self.means).zip(&self.optimal_values) {
            check_dim(h.feature_dim(), s.x.len())?;
            h.predict_into(&s.x, &mut c_hat);
            let decision = poly.argmin(&c_hat).index;
            total += (dot(mean, poly.vertex(decision)) - opt).max(0.0);
        }
        Ok(total / self.len() as f64)
    }

    /// Mean surrogate loss against the realized (noisy) test labels.
    pub fn surrogate_risk(&self, h: &LinearPredictor, poly: &Polytope, kind: SurrogateKind) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::InvalidInput("empty test set".into()));
        }
        check_dim(poly.dim(), h.output_dim())?;
        kind.validate()?;
        let mut c_hat = vec![0.0; poly.dim()];
        let mut total = 0.0;
        for s in &self.samples {
            check_dim(h.feature_dim(), s.x.len())?;
            check_dim(poly.dim(), s.c.len())?;
            h.predict_into(&s.x, &mut c_hat);
            total += loss_with_grad(kind, poly, &c_hat, &s.c, None);
        }
        Ok(total / self.len() as f64)
    }
}

/// Excess SPO risk of `h` over the features `xs` given the true conditional
/// mean `true_model`.
pub fn excess_spo_risk<F>(h: &LinearPredictor, poly: &Polytope, xs: &[Vec<f64>], true_model: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if xs.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let mut total = 0.0;
    for x in xs {
        let mean = true_model(x)?;
        check_dim(poly.dim(), mean.len())?;
        let decision = poly.solve_lo(&h.predict(x)?)?.index;
        let best = poly.argmin(&mean).value;
        total += (dot(&mean, poly.vertex(decision)) - best).max(0.0);
    }
    Ok(total / xs.len() as f64)
}

/// Empirical near-degeneracy function with a fitted power law
/// `Psi(b) ~ (b / b0)^kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    pub b_grid: Vec<f64>,
    pub psi: Vec<f64>,
    pub kappa_hat: Option<f64>,
    pub b0_hat: Option<f64>,
    pub samples: usize,
    /// The distances were measured on a conditional mean that is not in the
    /// hypothesis class.
    pub proxy: bool,
}

/// `Psi_hat(b)` = fraction of `distances` at most `b`, plus a least-squares fit
/// of `log Psi_hat` on `log b` over grid points with `0 < Psi_hat < 1`.
pub fn near_degeneracy_from_distances(distances: &[f64], b_grid: &[f64]) -> Result<PsiEstimate> {
    if distances.is_empty() {
        return Err(Error::InvalidInput("need at least one distance".into()));
    }
    if b_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("b grid must be strictly ascending".into()));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let psi: Vec<f64> = b_grid
        .iter()
        .map(|&b| sorted.partition_point(|&v| v <= b) as f64 / m)
        .collect();

    let points: Vec<(f64, f64)> = b_grid
        .iter()
        .zip(&psi)
        .filter(|&(&b, &p)| b > 0.0 && p > 0.0 && p < 1.0)
        .map(|(&b, &p)| (b.ln(), p.ln()))
        .collect();
    let (kappa_hat, b0_hat) = match fit_line(&points) {
        Some((slope, intercept)) if slope != 0.0 => (Some(slope), Some((-intercept / slope).exp())),
        _ => (None, None),
    };
    Ok(PsiEstimate {
        b_grid: b_grid.to_vec(),
        psi,
        kappa_hat,
        b0_hat,
        samples: distances.len(),
        proxy: false,
    })
}

/// Ordinary least squares `y = slope * x + intercept`.
fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Estimates the near-degeneracy function of a scenario from `m` fresh feature
/// draws, measuring `nu(E[c|x])`.
pub fn estimate_near_degeneracy(scenario: &Scenario, b_grid: &[f64], m: usize, seed: u64) -> Result<PsiEstimate> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let poly = scenario.polytope();
    let mut r = rng::stream(seed, 0, Role::Diagnostics);
    let distances: Vec<f64> = (0..m)
        .map(|_| poly.nu(&scenario.mean_unchecked(&scenario.sample_x(&mut r)), NormKind::L2, None))
        .collect();
    let mut est = near_degeneracy_from_distances(&distances, b_grid)?;
    est.proxy = matches!(scenario, Scenario::Pricing(_));
    Ok(est)
}

/// Geometric grid of `n` points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Supervised-over-active mean excess risk ratio at a label budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub label_budget: usize,
    pub mean_supervised: f64,
    pub mean_mbal: f64,
    /// `+inf` when the active risk is zero and the supervised one is not.
    pub ratio: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials_supervised: usize,
    pub trials_mbal: usize,
    /// Trials that never reached the budget.
    pub excluded_supervised: usize,
    pub excluded_mbal: usize,
}

pub const BOOTSTRAP_RESAMPLES: usize = 2000;
/// Two-sided confidence level of the bootstrap intervals.
pub const CONFIDENCE: f64 = 0.90;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ratio_of(num: f64, den: f64) -> f64 {
    match (num == 0.0, den == 0.0) {
        (true, true) => 1.0,
        (false, true) => f64::INFINITY,
        _ => num / den,
    }
}

/// Seed derived from the values themselves, so a group is resampled the same
/// way regardless of which side of the ratio it sits on.
fn content_seed(values: &[f64]) -> u64 {
    values.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
        (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Bootstrap resampled means of one group.
pub fn bootstrap_means(values: &[f64], resamples: usize) -> Vec<f64> {
    let mut r = rng::stream(content_seed(values), values.len() as u64, Role::Bootstrap);
    let n = values.len();
    (0..resamples)
        .map(|_| (0..n).map(|_| values[r.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect()
}

/// Percentile interval `(sorted[k], sorted[B-1-k])`, `k = floor(B * (1-level)/2)`.
pub fn percentile_interval(mut draws: Vec<f64>, level: f64) -> (f64, f64) {
    draws.sort_by(f64::total_cmp);
    let b = draws.len();
    let k = ((b as f64) * (1.0 - level) / 2.0).floor() as usize;
    (draws[k], draws[b - 1 - k])
}

/// Mean with a percentile-bootstrap interval.
pub fn mean_with_ci(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let (lo, hi) = percentile_interval(bootstrap_means(values, BOOTSTRAP_RESAMPLES), CONFIDENCE);
    Some((mean(values), lo, hi))
}

/// Ratio of mean risks with a percentile-bootstrap interval over trials.
pub fn risk_ratio(supervised: &[f64], mbal: &[f64], label_budget: usize) -> Result<RatioSummary> {
    if supervised.is_empty() || mbal.is_empty() {
        return Err(Error::InvalidInput("both groups need at least one trial".into()));
    }
    let sup_draws = bootstrap_means(supervised, BOOTSTRAP_RESAMPLES);
    let mbal_draws = bootstrap_means(mbal, BOOTSTRAP_RESAMPLES);
    let draws: Vec<f64> = sup_draws.iter().zip(&mbal_draws).map(|(s, m)| ratio_of(*s, *m)).collect();
    let (ci_lo, ci_hi) = percentile_interval(draws, CONFIDENCE);
    let (ms, mm) = (mean(supervised), mean(mbal));
    Ok(RatioSummary {
        label_budget,
        mean_supervised: ms,
        mean_mbal: mm,
        ratio: ratio_of(ms, mm),
        ci_lo,
        ci_hi,
        trials_supervised: supervised.len(),
        trials_mbal: mbal.len(),
        excluded_supervised: 0,
        excluded_mbal: 0,
    })
}

/// Risk ratio from traces, read at `label_budget` labels past the warm-up.
pub fn risk_ratio_table(supervised: &[TrialTrace], mbal: &[TrialTrace], label_budget: usize) -> Result<RatioSummary> {
    let collect = |traces: &[TrialTrace]| {
        let risks: Vec<f64> = traces.iter().filter_map(|t| t.excess_risk_at_budget(label_budget)).collect();
        let excluded = traces.len() - risks.len();
        (risks, excluded)
    };
    let (sup, sup_excluded) = collect(supervised);
    let (act, act_excluded) = collect(mbal);
    let mut summary = risk_ratio(&sup, &act, label_budget)?;
    summary.excluded_supervised = sup_excluded;
    summary.excluded_mbal = act_excluded;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_shortest_path_scenario, ShortestPathParams};

    #[test]
    fn psi_counts_and_fit() {
        let d: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let est = near_degeneracy_from_distances(&d, &[0.005, 0.1, 0.5, 2.0]).unwrap();
        assert_eq!(est.psi, vec![0.0, 0.1, 0.5, 1.0]);
        // uniform distances: Psi(b) = b, so kappa = 1 and b0 = 1
        let est = near_degeneracy_from_distances(&d, &log_grid(0.02, 0.9, 12)).unwrap();
        let k = est.kappa_hat.unwrap();
        assert!((k - 1.0).abs() < 0.1, "{k}");
        assert!((est.b0_hat.unwrap() - 1.0).abs() < 0.1);
        let flat = near_degeneracy_from_distances(&[1.0, 1.0], &[0.5, 2.0]).unwrap();
        assert_eq!(flat.kappa_hat, None);
        assert!(near_degeneracy_from_distances(&d, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn ratio_conventions() {
        let r = risk_ratio(&[1.0, 2.0], &[1.0, 2.0], 5).unwrap();
        assert_eq!(r.ratio, 1.0);
        let r = risk_ratio(&[0.5], &[0.0], 5).unwrap();
        assert_eq!(r.ratio, f64::INFINITY);
        let a = [0.3, 0.1, 0.5, 0.2];
        let b = [0.05, 0.02, 0.1, 0.01];
        let ab = risk_ratio(&a, &b, 1).unwrap();
        let ba = risk_ratio(&b, &a, 1).unwrap();
        assert!((ab.ratio * ba.ratio - 1.0).abs() < 1e-12);
        assert!((ab.ci_lo * ba.ci_hi - 1.0).abs() < 1e-12);
        assert!((ab.ci_hi * ba.ci_lo - 1.0).abs() < 1e-12);
        assert!(ab.ci_lo <= ab.ratio && ab.ratio <= ab.ci_hi);
    }

    #[test]
    fn test_set_risk_matches_free_function() {
        let scn = Scenario::ShortestPath(gen_shortest_path_scenario(4, ShortestPathParams::default()).unwrap());
        let test = TestSet::for_trial(&scn, 200, 1, 0).unwrap();
        let rows: Vec<Vec<f64>> = (0..12).map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 5) as f64 - 2.0).collect()).collect();
        let h = LinearPredictor::from_rows(&rows).unwrap();
        let poly = scn.polytope();
        let xs: Vec<Vec<f64>> = test.samples.iter().map(|s| s.x.clone()).collect();
        let a = test.excess_spo_risk(&h, poly).unwrap();
        let b = excess_spo_risk(&h, poly, &xs, |x| scn.conditional_mean(x)).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a >= 0.0);
        assert!(excess_spo_risk(&h, poly, &[], |x| scn.conditional_mean(x)).is_err());
    }
}
