//! The margin-based stream learner and its fully supervised baseline.
//!
//! After a warm-up period in which the first `n0` samples are all labeled, the
//! learner sees one feature vector per iteration and computes the distance to
//! degeneracy `nu` of the current prediction. Samples with `nu` below the
//! threshold `b_{t-1}` are labeled and enter `W`. The others are labeled only
//! when a coin with heads probability `p_tilde` comes up heads; they enter `W~`
//! and carry weight `1 / p_tilde` in the training objective. With
//! `p_tilde = 0` they are rejected outright (hard rejection).
//!
//! The threshold starts at the `q_tilde` empirical quantile `b_0` of the
//! warm-up distances and then follows
//! `b_t = b_0 * (n0 * ln(n0 + t) / t)^exponent`, exponent `1/4` by default.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Scenario;
use crate::error::{check_dim, Error, Result};
use crate::hypothesis::{fit_erm_report, LinearPredictor, Objective, TrainerConfig};
use crate::losses::{LabeledSample, SurrogateKind};
use crate::metrics::TestSet;
use crate::polytope::{NormKind, Polytope};
use crate::rng::{self, Role, StreamRng};

pub const DEFAULT_SCHEDULE_EXPONENT: f64 = 0.25;

/// When to evaluate test risks during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalCadence {
    /// After the warm-up and after every label acquisition.
    #[default]
    OnLabel,
    /// After the warm-up and every `n` iterations.
    Every(usize),
    /// Only after the warm-up and after the last iteration.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbalConfig {
    /// Labeling probability for samples far from degeneracy.
    pub p_tilde: f64,
    /// Quantile of the warm-up distances used as the initial threshold.
    pub q_tilde: f64,
    /// Warm-up length.
    pub n0: usize,
    pub surrogate: SurrogateKind,
    pub trainer: TrainerConfig,
    pub norm: NormKind,
    pub seed: u64,
    pub schedule_exponent: f64,
    pub eval_cadence: EvalCadence,
    /// Replaces the quantile-based `b_0` when set.
    pub initial_threshold: Option<f64>,
}

impl Default for MbalConfig {
    fn default() -> Self {
        MbalConfig {
            p_tilde: 1e-5,
            q_tilde: 0.5,
            n0: 10,
            surrogate: SurrogateKind::SpoPlus,
            trainer: TrainerConfig::default(),
            norm: NormKind::L2,
            seed: 0,
            schedule_exponent: DEFAULT_SCHEDULE_EXPONENT,
            eval_cadence: EvalCadence::OnLabel,
            initial_threshold: None,
        }
    }
}

impl MbalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_tilde) {
            return Err(Error::InvalidInput(format!("p_tilde must lie in [0, 1], got {}", self.p_tilde)));
        }
        if !(self.q_tilde > 0.0 && self.q_tilde <= 1.0) {
            return Err(Error::InvalidInput(format!("q_tilde must lie in (0, 1], got {}", self.q_tilde)));
        }
        if self.n0 == 0 {
            return Err(Error::InvalidInput("warm-up length must be at least 1".into()));
        }
        if !self.schedule_exponent.is_finite() {
            return Err(Error::InvalidInput("schedule exponent must be finite".into()));
        }
        if let Some(b) = self.initial_threshold {
            if !(b >= 0.0) {
                return Err(Error::InvalidInput(format!("initial threshold must be >= 0, got {b}")));
            }
        }
        if let EvalCadence::Every(0) = self.eval_cadence {
            return Err(Error::InvalidInput("evaluation interval must be positive".into()));
        }
        self.surrogate.validate()?;
        self.trainer.validate()
    }
}

/// `b_0 * (n0 * ln(n0 + t) / t)^exponent` for `t >= 1`.
pub fn threshold_at(b0: f64, n0: usize, t: usize, exponent: f64) -> f64 {
    assert!(t >= 1, "threshold schedule starts at t = 1");
    if b0 == 0.0 {
        return 0.0;
    }
    let n0 = n0 as f64;
    let t = t as f64;
    b0 * (n0 * (n0 + t).ln() / t).powf(exponent)
}

/// Nearest-rank empirical quantile: the `ceil(q * n)`-th smallest value.
pub fn nearest_rank_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty set".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidInput(format!("quantile level must lie in (0, 1], got {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Mutable state of one learner.
#[derive(Debug, Clone)]
pub struct LearnerState {
    /// Completed iterations after the warm-up.
    pub t: usize,
    pub h: LinearPredictor,
    pub b0: f64,
    /// Threshold for the next iteration, `b_t`.
    pub b: f64,
    /// Warm-up samples and samples labeled near degeneracy.
    pub labeled: Vec<LabeledSample>,
    /// Samples labeled by the soft-rejection coin.
    pub soft_labeled: Vec<LabeledSample>,
    pub n_labels: usize,
    /// Set once a fit used the raw SPO loss.
    pub heuristic: bool,
    coin: StreamRng,
}

impl LearnerState {
    /// Normalizer `t + n0` of the objective after `t` iterations.
    fn denom(&self, n0: usize) -> f64 {
        (self.t + n0) as f64
    }
}

/// Decision taken at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `nu(h_{t-1}(x_t))`; `None` on the warm-up record.
    pub nu: Option<f64>,
    /// Threshold `b_{t-1}` the distance was compared against.
    pub b: f64,
    /// `nu < b`.
    pub near_margin: bool,
    /// Coin outcome; `None` when no coin was flipped.
    pub coin: Option<bool>,
    pub labeled: bool,
    pub n_labels: usize,
    pub surrogate_risk_test: Option<f64>,
    pub excess_spo_risk_test: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mbal,
    Supervised,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Mbal => "mbal",
            Algorithm::Supervised => "supervised",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub algorithm: Algorithm,
    pub surrogate: SurrogateKind,
    pub n0: usize,
    pub trial: u64,
    pub b0: f64,
    /// Iteration 0 is the warm-up evaluation.
    pub records: Vec<IterationRecord>,
    pub predictor: LinearPredictor,
    pub oracle_calls: usize,
    pub heuristic: bool,
}

impl TrialTrace {
    pub fn final_labels(&self) -> usize {
        self.records.last().map_or(self.n0, |r| r.n_labels)
    }

    /// Excess SPO risk at the evaluation where the post-warm-up label count
    /// first equals `budget`.
    pub fn excess_risk_at_budget(&self, budget: usize) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.n_labels == self.n0 + budget && r.excess_spo_risk_test.is_some())
            .and_then(|r| r.excess_spo_risk_test)
    }
}

fn fit(
    cfg: &MbalConfig,
    poly: &Polytope,
    init: &LinearPredictor,
    labeled: &[LabeledSample],
    soft_labeled: &[LabeledSample],
    denom: f64,
) -> Result<(LinearPredictor, bool)> {
    let obj = Objective {
        kind: cfg.surrogate,
        poly,
        labeled,
        soft_labeled,
        p_tilde: cfg.p_tilde,
        denom,
    };
    let report = fit_erm_report(init, &obj, &cfg.trainer)?;
    Ok((report.predictor, report.heuristic))
}

/// Labels the first `n0` samples, fits `h_0` and sets `b_0` to the `q_tilde`
/// quantile of the warm-up distances to degeneracy.
pub fn warmup_init<I>(cfg: &MbalConfig, stream: I, poly: &Polytope, trial: u64) -> Result<LearnerState>
where
    I: IntoIterator<Item = LabeledSample>,
{
    cfg.validate()?;
    let warm: Vec<LabeledSample> = stream.into_iter().take(cfg.n0).collect();
    if warm.len() < cfg.n0 {
        return Err(Error::StreamExhausted(warm.len()));
    }
    let p = warm[0].x.len();
    for s in &warm {
        check_dim(p, s.x.len())?;
        check_dim(poly.dim(), s.c.len())?;
    }
    let init = LinearPredictor::zeros(poly.dim(), p);
    let (h, heuristic) = fit(cfg, poly, &init, &warm, &[], cfg.n0 as f64)?;
    let b0 = match cfg.initial_threshold {
        Some(b) => b,
        None => {
            let mut c_hat = vec![0.0; poly.dim()];
            let distances: Vec<f64> = warm
                .iter()
                .map(|s| {
                    h.predict_into(&s.x, &mut c_hat);
                    poly.nu(&c_hat, cfg.norm, None)
                })
                .collect();
            nearest_rank_quantile(&distances, cfg.q_tilde)?
        }
    };
    Ok(LearnerState {
        t: 0,
        h,
        b0,
        b: b0,
        labeled: warm,
        soft_labeled: Vec::new(),
        n_labels: cfg.n0,
        heuristic,
        coin: rng::stream(cfg.seed, trial, Role::Coin),
    })
}

/// Runs one iteration on feature vector `x`, asking `label_oracle` for the
/// cost vector only when the sample is kept.
///
/// The predictor is refit (warm-started) whenever a label was acquired. When
/// the sample is rejected the working sets are unchanged and the objective is
/// only rescaled, so its minimizers and the current predictor stay put.
pub fn margin_step<F>(
    state: &mut LearnerState,
    x: &[f64],
    mut label_oracle: F,
    poly: &Polytope,
    cfg: &MbalConfig,
) -> Result<IterationRecord>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    check_dim(state.h.feature_dim(), x.len())?;
    let t = state.t + 1;
    let c_hat = state.h.predict(x)?;
    let nu = poly.nu(&c_hat, cfg.norm, None);
    let b = state.b;
    let near_margin = nu < b;
    let coin = if near_margin {
        None
    } else {
        Some(state.coin.random::<f64>() < cfg.p_tilde)
    };
    let labeled = near_margin || coin == Some(true);
    state.t = t;
    if labeled {
        let c = label_oracle(x)?;
        check_dim(poly.dim(), c.len())?;
        let sample = LabeledSample::new(x.to_vec(), c)?;
        if near_margin {
            state.labeled.push(sample);
        } else {
            state.soft_labeled.push(sample);
        }
        state.n_labels += 1;
        let denom = state.denom(cfg.n0);
        let (h, heuristic) = fit(cfg, poly, &state.h, &state.labeled, &state.soft_labeled, denom)?;
        state.h = h;
        state.heuristic |= heuristic;
    }
    state.b = threshold_at(state.b0, cfg.n0, t, cfg.schedule_exponent);
    Ok(IterationRecord {
        t,
        nu: Some(nu),
        b,
        near_margin,
        coin,
        labeled,
        n_labels: state.n_labels,
        surrogate_risk_test: None,
        excess_spo_risk_test: None,
    })
}

/// Stopping rule and identity of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Maximum number of iterations after the warm-up.
    pub iterations: usize,
    /// Stop once this many labels were acquired after the warm-up.
    pub label_budget: Option<usize>,
    pub trial: u64,
}

/// Training stream over a scenario: draws `x_t` and its label noise every
/// iteration, so the data sequence does not depend on which samples get
/// labeled. The label is only materialized through [`ScenarioStream::label`].
pub struct ScenarioStream<'a> {
    scenario: &'a Scenario,
    rng: StreamRng,
    pending_noise: Vec<f64>,
    pub oracle_calls: usize,
}

impl<'a> ScenarioStream<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64, trial: u64) -> Self {
        ScenarioStream {
            scenario,
            rng: rng::stream(seed, trial, Role::Data),
            pending_noise: Vec::new(),
            oracle_calls: 0,
        }
    }

    pub fn next_x(&mut self) -> Vec<f64> {
        let x = self.scenario.sample_x(&mut self.rng);
        self.pending_noise = self.scenario.sample_noise(&mut self.rng);
        x
    }

    /// Label of the most recent feature vector.
    pub fn label(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        if self.pending_noise.is_empty() {
            return Err(Error::Oracle("no pending sample to label".into()));
        }
        self.oracle_calls += 1;
        self.scenario.label_with_noise(x, &self.pending_noise)
    }

    /// Draws and labels the next sample (warm-up path; not counted as an
    /// oracle call).
    pub fn next_labeled(&mut self) -> Result<LabeledSample> {
        let x = self.next_x();
        let c = self.scenario.label_with_noise(&x, &self.pending_noise)?;
        LabeledSample::new(x, c)
    }
}

fn evaluate(record: &mut IterationRecord, cfg: &MbalConfig, poly: &Polytope, h: &LinearPredictor, test: &TestSet) -> Result<()> {
    record.surrogate_risk_test = Some(test.surrogate_risk(h, poly, cfg.surrogate)?);
    record.excess_spo_risk_test = Some(test.excess_spo_risk(h, poly)?);
    Ok(())
}

fn due(cadence: EvalCadence, record: &IterationRecord, last: bool) -> bool {
    last || match cadence {
        EvalCadence::OnLabel => record.labeled,
        EvalCadence::Every(n) => record.t % n == 0,
        EvalCadence::Final => false,
    }
}

fn warmup_record(state: &LearnerState) -> IterationRecord {
    IterationRecord {
        t: 0,
        nu: None,
        b: state.b0,
        near_margin: false,
        coin: None,
        labeled: false,
        n_labels: state.n_labels,
        surrogate_risk_test: None,
        excess_spo_risk_test: None,
    }
}

fn budget_reached(state: &LearnerState, cfg: &MbalConfig, opts: &RunOptions) -> bool {
    opts.label_budget.is_some_and(|b| state.n_labels >= cfg.n0 + b)
}

/// Warm-up followed by up to `opts.iterations` margin steps.
pub fn run_stream(cfg: &MbalConfig, scenario: &Scenario, opts: &RunOptions, test: &TestSet) -> Result<TrialTrace> {
    cfg.validate()?;
    let poly = scenario.polytope();
    let mut stream = ScenarioStream::new(scenario, cfg.seed, opts.trial);
    let warm = (0..cfg.n0).map(|_| stream.next_labeled()).collect::<Result<Vec<_>>>()?;
    let mut state = warmup_init(cfg, warm, poly, opts.trial)?;

    let mut records = Vec::with_capacity(opts.iterations + 1);
    let mut first = warmup_record(&state);
    evaluate(&mut first, cfg, poly, &state.h, test)?;
    records.push(first);

    for t in 1..=opts.iterations {
        if budget_reached(&state, cfg, opts) {
            break;
        }
        let x = stream.next_x();
        let mut record = margin_step(&mut state, &x, |x| stream.label(x), poly, cfg)?;
        let last = t == opts.iterations || budget_reached(&state, cfg, opts);
        if due(cfg.eval_cadence, &record, last) {
            evaluate(&mut record, cfg, poly, &state.h, test)?;
        }
        records.push(record);
    }
    Ok(TrialTrace {
        algorithm: Algorithm::Mbal,
        surrogate: cfg.surrogate,
        n0: cfg.n0,
        trial: opts.trial,
        b0: state.b0,
        records,
        predictor: state.h,
        oracle_calls: stream.oracle_calls,
        heuristic: state.heuristic,
    })
}

/// Baseline that labels every sample of the same stream.
pub fn run_supervised(cfg: &MbalConfig, scenario: &Scenario, opts: &RunOptions, test: &TestSet) -> Result<TrialTrace> {
    cfg.validate()?;
    let poly = scenario.polytope();
    let mut stream = ScenarioStream::new(scenario, cfg.seed, opts.trial);
    let mut labeled = (0..cfg.n0).map(|_| stream.next_labeled()).collect::<Result<Vec<_>>>()?;
    let zero = LinearPredictor::zeros(poly.dim(), scenario.feature_dim());
    let (mut h, mut heuristic) = fit(cfg, poly, &zero, &labeled, &[], cfg.n0 as f64)?;

    let mut first = IterationRecord {
        t: 0,
        nu: None,
        b: f64::INFINITY,
        near_margin: false,
        coin: None,
        labeled: false,
        n_labels: cfg.n0,
        surrogate_risk_test: None,
        excess_spo_risk_test: None,
    };
    evaluate(&mut first, cfg, poly, &h, test)?;
    let mut records = vec![first];

    let iterations = match opts.label_budget {
        Some(b) => b.min(opts.iterations),
        None => opts.iterations,
    };
    for t in 1..=iterations {
        let x = stream.next_x();
        let nu = poly.nu(&h.predict(&x)?, cfg.norm, None);
        let c = stream.label(&x)?;
        labeled.push(LabeledSample::new(x, c)?);
        let (next, flag) = fit(cfg, poly, &h, &labeled, &[], labeled.len() as f64)?;
        h = next;
        heuristic |= flag;
        let mut record = IterationRecord {
            t,
            nu: Some(nu),
            b: f64::INFINITY,
            near_margin: true,
            coin: None,
            labeled: true,
            n_labels: labeled.len(),
            surrogate_risk_test: None,
            excess_spo_risk_test: None,
        };
        if due(cfg.eval_cadence, &record, t == iterations) {
            evaluate(&mut record, cfg, poly, &h, test)?;
        }
        records.push(record);
    }
    Ok(TrialTrace {
        algorithm: Algorithm::Supervised,
        surrogate: cfg.surrogate,
        n0: cfg.n0,
        trial: opts.trial,
        b0: f64::INFINITY,
        records,
        predictor: h,
        oracle_calls: stream.oracle_calls,
        heuristic,
    })
}
