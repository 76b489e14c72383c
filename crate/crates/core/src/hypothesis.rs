//! Affine cost predictors and the warm-started (sub)gradient trainer.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::losses::{loss_with_grad, validate_objective, LabeledSample, SurrogateKind};
use crate::polytope::Polytope;

/// Affine map `x -> W [x; 1]` with `W` of shape `d x (p + 1)`; the last column
/// is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    d: usize,
    p: usize,
    /// Row-major `d x (p + 1)`.
    weights: Vec<f64>,
}

impl LinearPredictor {
    pub fn zeros(d: usize, p: usize) -> Self {
        LinearPredictor {
            d,
            p,
            weights: vec![0.0; d * (p + 1)],
        }
    }

    /// Builds a predictor from `d` rows of length `p + 1`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let width = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("predictor needs at least one row".into()))?;
        if width == 0 {
            return Err(Error::InvalidInput("rows must hold at least the intercept".into()));
        }
        let mut weights = Vec::with_capacity(d * width);
        for r in rows {
            check_dim(width, r.len())?;
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite weight".into()));
            }
            weights.extend_from_slice(r);
        }
        Ok(LinearPredictor { d, p: width - 1, weights })
    }

    pub fn output_dim(&self) -> usize {
        self.d
    }

    pub fn feature_dim(&self) -> usize {
        self.p
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * (self.p + 1) + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.weights[row * (self.p + 1) + col] = value;
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.p, x.len())?;
        let mut out = vec![0.0; self.d];
        self.predict_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        let width = self.p + 1;
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(width)) {
            let (coef, intercept) = row.split_at(self.p);
            *o = coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + intercept[0];
        }
    }

    fn clip(&mut self, bound: f64) {
        for w in &mut self.weights {
            *w = w.clamp(-bound, bound);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDecay {
    Constant,
    /// `step_size / sqrt(epoch)`.
    #[default]
    InvSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub step_size: f64,
    pub step_decay: StepDecay,
    /// Full-batch passes per call to [`fit_erm`].
    pub epochs_per_update: usize,
    /// Stop early once the normalized gradient norm drops to this value.
    pub tolerance: f64,
    /// Sup-norm bound on the weights, enforced by projection after every step.
    pub weight_clip: Option<f64>,
    /// Descend in coordinates where the training features are centered and
    /// scaled to unit variance. The affine class is unchanged; only the
    /// conditioning of the descent improves.
    #[serde(default = "default_standardize")]
    pub standardize: bool,
}

fn default_standardize() -> bool {
    false
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            step_size: 0.003,
            step_decay: StepDecay::InvSqrt,
            epochs_per_update: 200,
            tolerance: 1e-8,
            weight_clip: None,
            standardize: false,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidInput(format!("step_size must be positive, got {}", self.step_size)));
        }
        if self.epochs_per_update == 0 {
            return Err(Error::InvalidInput("epochs_per_update must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidInput("tolerance must be non-negative".into()));
        }
        if let Some(b) = self.weight_clip {
            if !(b > 0.0) {
                return Err(Error::InvalidInput(format!("weight_clip must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one trainer call.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub predictor: LinearPredictor,
    /// Objective at the (clipped) starting point.
    pub initial_objective: f64,
    pub objective: f64,
    pub epochs_run: usize,
    /// Set when the surrogate is the raw SPO loss, whose descent direction is
    /// only a heuristic.
    pub heuristic: bool,
}

/// The stream learner's objective: samples in `labeled` weigh 1, samples in
/// `soft_labeled` weigh `1 / p_tilde`, everything divided by `denom`.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub kind: SurrogateKind,
    pub poly: &'a Polytope,
    pub labeled: &'a [LabeledSample],
    pub soft_labeled: &'a [LabeledSample],
    pub p_tilde: f64,
    pub denom: f64,
}

impl Objective<'_> {
    fn total_weight(&self) -> f64 {
        let soft = if self.soft_labeled.is_empty() {
            0.0
        } else {
            self.soft_labeled.len() as f64 / self.p_tilde
        };
        self.labeled.len() as f64 + soft
    }

    /// Objective value, accumulating its gradient w.r.t. the weights into `grad`.
    fn eval(&self, h: &LinearPredictor, grad: Option<&mut [f64]>) -> f64 {
        let d = h.d;
        let width = h.p + 1;
        let mut c_hat = vec![0.0; d];
        let mut g = vec![0.0; d];
        let mut acc_grad = grad;
        if let Some(buf) = acc_grad.as_deref_mut() {
            buf.fill(0.0);
        }
        let mut total = 0.0;
        let groups = [(self.labeled, 1.0), (self.soft_labeled, 1.0 / self.p_tilde)];
        for (samples, weight) in groups {
            if samples.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            for s in samples {
                h.predict_into(&s.x, &mut c_hat);
                let with_grad = acc_grad.is_some();
                sum += loss_with_grad(
                    self.kind,
                    self.poly,
                    &c_hat,
                    &s.c,
                    if with_grad { Some(&mut g) } else { None },
                );
                if let Some(buf) = acc_grad.as_deref_mut() {
                    let scale = weight / self.denom;
                    for (row, gi) in buf.chunks_exact_mut(width).zip(&g) {
                        if *gi == 0.0 {
                            continue;
                        }
                        let coef = gi * scale;
                        let (feat, intercept) = row.split_at_mut(h.p);
                        for (r, xv) in feat.iter_mut().zip(&s.x) {
                            *r += coef * xv;
                        }
                        intercept[0] += coef;
                    }
                }
            }
            total += weight * sum;
        }
        total / self.denom
    }

    fn check_shapes(&self, h: &LinearPredictor) -> Result<()> {
        check_dim(self.poly.dim(), h.d)?;
        for s in self.labeled.iter().chain(self.soft_labeled) {
            check_dim(h.p, s.x.len())?;
            check_dim(h.d, s.c.len())?;
        }
        Ok(())
    }

    pub fn value(&self, h: &LinearPredictor) -> Result<f64> {
        validate_objective(self.labeled, self.soft_labeled, self.p_tilde, self.denom)?;
        self.check_shapes(h)?;
        if self.labeled.is_empty() && self.soft_labeled.is_empty() {
            return Ok(0.0);
        }
        Ok(self.eval(h, None))
    }
}

/// Minimizes the reweighted empirical objective by full-batch (sub)gradient
/// descent started from `init`, returning the best iterate seen.
#[allow(clippy::too_many_arguments)]
pub fn fit_erm(
    init: &LinearPredictor,
    kind: SurrogateKind,
    poly: &Polytope,
    labeled: &[LabeledSample],
    soft_labeled: &[LabeledSample],
    p_tilde: f64,
    denom: f64,
    cfg: &TrainerConfig,
) -> Result<LinearPredictor> {
    let objective = Objective {
        kind,
        poly,
        labeled,
        soft_labeled,
        p_tilde,
        denom,
    };
    Ok(fit_erm_report(init, &objective, cfg)?.predictor)
}

pub fn fit_erm_report(init: &LinearPredictor, obj: &Objective<'_>, cfg: &TrainerConfig) -> Result<FitReport> {
    validate_objective(obj.labeled, obj.soft_labeled, obj.p_tilde, obj.denom)?;
    obj.kind.validate()?;
    cfg.validate()?;
    obj.check_shapes(init)?;
    let heuristic = !obj.kind.is_convex();

    let mut h = init.clone();
    if let Some(bound) = cfg.weight_clip {
        h.clip(bound);
    }
    if obj.labeled.is_empty() && obj.soft_labeled.is_empty() {
        return Ok(FitReport {
            predictor: h,
            initial_objective: 0.0,
            objective: 0.0,
            epochs_run: 0,
            heuristic,
        });
    }
    if !cfg.standardize {
        return Ok(descend(h, obj, cfg, None, heuristic));
    }

    let coords = Standardizer::fit(obj.labeled.iter().chain(obj.soft_labeled).map(|s| s.x.as_slice()), h.p);
    let labeled: Vec<LabeledSample> = obj.labeled.iter().map(|s| coords.sample(s)).collect();
    let soft: Vec<LabeledSample> = obj.soft_labeled.iter().map(|s| coords.sample(s)).collect();
    let inner = Objective {
        labeled: &labeled,
        soft_labeled: &soft,
        ..*obj
    };
    coords.to_scaled(&mut h);
    let mut report = descend(h, &inner, cfg, Some(&coords), heuristic);
    coords.to_original(&mut report.predictor);
    Ok(report)
}

/// Per-feature centering and scaling estimated from the training features.
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit<'x>(xs: impl Iterator<Item = &'x [f64]>, p: usize) -> Self {
        let mut n = 0.0;
        let mut mean = vec![0.0; p];
        let mut m2 = vec![0.0; p];
        for x in xs {
            n += 1.0;
            for k in 0..p {
                let delta = x[k] - mean[k];
                mean[k] += delta / n;
                m2[k] += delta * (x[k] - mean[k]);
            }
        }
        let scale = mean
            .iter()
            .zip(&m2)
            .map(|(m, v)| {
                let sd = (v / n).sqrt();
                // Constant features are only centered.
                if sd > 1e-12 * m.abs().max(1.0) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn sample(&self, s: &LabeledSample) -> LabeledSample {
        let z = s
            .x
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, sd))| (x - m) / sd)
            .collect();
        LabeledSample { x: z, c: s.c.clone() }
    }

    /// Rewrites weights on raw features as weights on scaled features.
    fn to_scaled(&self, h: &mut LinearPredictor) {
        let p = h.p;
        for row in h.weights.chunks_exact_mut(p + 1) {
            let shift: f64 = row[..p].iter().zip(&self.mean).map(|(w, m)| w * m).sum();
            for (w, sd) in row[..p].iter_mut().zip(&self.scale) {
                *w *= sd;
            }
            row[p] += shift;
        }
    }

    fn to_original(&self, h: &mut LinearPredictor) {
        let p = h.p;
        for row in h.weights.chunks_exact_mut(p + 1) {
            for (w, sd) in row[..p].iter_mut().zip(&self.scale) {
                *w /= sd;
            }
            let shift: f64 = row[..p].iter().zip(&self.mean).map(|(w, m)| w * m).sum();
            row[p] -= shift;
        }
    }
}

fn descend(
    mut h: LinearPredictor,
    obj: &Objective<'_>,
    cfg: &TrainerConfig,
    coords: Option<&Standardizer>,
    heuristic: bool,
) -> FitReport {
    // The minimizers do not depend on the positive normalizer, so steps are
    // taken on the weight-averaged objective. This keeps the effective step
    // length independent of how many stream samples were rejected.
    let rescale = obj.denom / obj.total_weight();
    let project = |h: &mut LinearPredictor| {
        if let Some(bound) = cfg.weight_clip {
            match coords {
                Some(c) => {
                    c.to_original(h);
                    h.clip(bound);
                    c.to_scaled(h);
                }
                None => h.clip(bound),
            }
        }
    };

    let mut grad = vec![0.0; h.weights.len()];
    let mut best = h.clone();
    let mut best_value = f64::INFINITY;
    let mut initial = None;
    let mut epochs_run = 0;
    for epoch in 1..=cfg.epochs_per_update {
        let value = obj.eval(&h, Some(&mut grad));
        initial.get_or_insert(value);
        if value < best_value {
            best_value = value;
            best.weights.copy_from_slice(&h.weights);
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() * rescale;
        if grad_norm <= cfg.tolerance {
            break;
        }
        let step = match cfg.step_decay {
            StepDecay::Constant => cfg.step_size,
            StepDecay::InvSqrt => cfg.step_size / (epoch as f64).sqrt(),
        } * rescale;
        for (w, g) in h.weights.iter_mut().zip(&grad) {
            *w -= step * g;
        }
        project(&mut h);
        epochs_run = epoch;
    }
    if epochs_run == cfg.epochs_per_update {
        let value = obj.eval(&h, None);
        if value < best_value {
            best_value = value;
            best = h;
        }
    }
    FitReport {
        predictor: best,
        initial_objective: initial.unwrap_or(best_value),
        objective: best_value,
        epochs_run,
        heuristic,
    }
}
