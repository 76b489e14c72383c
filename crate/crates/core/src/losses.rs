//! Decision losses and regression surrogates.
//!
//! For a prediction `c_hat` and realized cost `c` over a polytope `S`:
//!
//! ```text
//! spo(c_hat, c)  = c.w*(c_hat) - c.w*(c)
//! spo+(c_hat, c) = max_{w in S} (c - 2 c_hat).w + 2 c_hat.w*(c) - c.w*(c)
//! ```
//!
//! SPO+ is convex in `c_hat` and upper bounds SPO. Its subgradient follows from
//! Danskin's theorem: `2 (w*(c) - w*(2 c_hat - c))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hypothesis::LinearPredictor;
use crate::polytope::{dot, Polytope};

pub const DEFAULT_HUBER_DELTA: f64 = 1.0;

/// Training surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurrogateKind {
    /// The decision regret itself. Non-convex; trained with the SPO+
    /// subgradient as a heuristic direction.
    Spo,
    #[serde(rename = "spo+")]
    SpoPlus,
    Squared,
    Mae,
    Huber { delta: f64 },
}

impl SurrogateKind {
    pub fn huber() -> Self {
        SurrogateKind::Huber {
            delta: DEFAULT_HUBER_DELTA,
        }
    }

    pub fn is_regression(&self) -> bool {
        matches!(self, SurrogateKind::Squared | SurrogateKind::Mae | SurrogateKind::Huber { .. })
    }

    /// Convex surrogates have monotone-improvement guarantees in the trainer.
    pub fn is_convex(&self) -> bool {
        !matches!(self, SurrogateKind::Spo)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SurrogateKind::Huber { delta } if !(*delta > 0.0 && delta.is_finite()) => Err(
                Error::InvalidInput(format!("huber delta must be positive, got {delta}")),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurrogateKind::Spo => f.write_str("spo"),
            SurrogateKind::SpoPlus => f.write_str("spo+"),
            SurrogateKind::Squared => f.write_str("squared"),
            SurrogateKind::Mae => f.write_str("mae"),
            SurrogateKind::Huber { delta } if *delta == DEFAULT_HUBER_DELTA => f.write_str("huber"),
            SurrogateKind::Huber { delta } => write!(f, "huber:{delta}"),
        }
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    /// Accepts `spo`, `spo+` (or `spoplus`), `squared`, `mae`, `huber` and
    /// `huber:<delta>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let kind = match lower.as_str() {
            "spo" => SurrogateKind::Spo,
            "spo+" | "spoplus" | "spo-plus" => SurrogateKind::SpoPlus,
            "squared" | "l2" => SurrogateKind::Squared,
            "mae" | "l1" => SurrogateKind::Mae,
            "huber" => SurrogateKind::huber(),
            other => match other.strip_prefix("huber:") {
                Some(d) => SurrogateKind::Huber {
                    delta: d
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad huber delta `{d}`")))?,
                },
                None => return Err(Error::InvalidInput(format!("unknown surrogate `{s}`"))),
            },
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// A feature vector paired with its realized cost vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub c: Vec<f64>,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if x.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample has a non-finite entry".into()));
        }
        Ok(LabeledSample { x, c })
    }
}

fn check_pair(poly: &Polytope, c_hat: &[f64], c: &[f64]) -> Result<()> {
    check_dim(poly.dim(), c_hat.len())?;
    check_dim(poly.dim(), c.len())
}

/// Decision regret of acting on `c_hat` when the cost is `c`.
pub fn spo_loss(poly: &Polytope, c_hat: &[f64], c: &[f64]) -> Result<f64> {
    check_pair(poly, c_hat, c)?;
    Ok(spo_unchecked(poly, c_hat, c))
}

fn spo_unchecked(poly: &Polytope, c_hat: &[f64], c: &[f64]) -> f64 {
    let decision = poly.argmin(c_hat).index;
    (dot(c, poly.vertex(decision)) - poly.argmin(c).value).max(0.0)
}

pub fn spo_plus_loss(poly: &Polytope, c_hat: &[f64], c: &[f64]) -> Result<f64> {
    check_pair(poly, c_hat, c)?;
    Ok(spo_plus_with_grad(poly, c_hat, c, None))
}

/// Subgradient of `c_hat -> spo+(c_hat, c)`.
pub fn spo_plus_subgradient(poly: &Polytope, c_hat: &[f64], c: &[f64]) -> Result<Vec<f64>> {
    check_pair(poly, c_hat, c)?;
    let mut g = vec![0.0; c.len()];
    spo_plus_with_grad(poly, c_hat, c, Some(&mut g));
    Ok(g)
}

/// Evaluates SPO+ and, when `grad` is given, writes its subgradient.
fn spo_plus_with_grad(poly: &Polytope, c_hat: &[f64], c: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let opt = poly.argmin(c);
    let w_opt = poly.vertex(opt.index);
    // max_w (c - 2 c_hat).w = -min_w (2 c_hat - c).w
    let shifted: Vec<f64> = c_hat.iter().zip(c).map(|(h, y)| 2.0 * h - y).collect();
    let inner = poly.argmin(&shifted);
    let value = -inner.value + 2.0 * dot(c_hat, w_opt) - opt.value;
    if let Some(g) = grad {
        let w_inner = poly.vertex(inner.index);
        for ((gi, a), b) in g.iter_mut().zip(w_opt).zip(w_inner) {
            *gi = 2.0 * (a - b);
        }
    }
    value.max(0.0)
}

/// Pointwise regression loss and a (sub)gradient in `c_hat`.
pub fn regression_loss(kind: SurrogateKind, c_hat: &[f64], c: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim(c.len(), c_hat.len())?;
    if !kind.is_regression() {
        return Err(Error::Usage(format!("{kind} is not a regression surrogate")));
    }
    kind.validate()?;
    let mut grad = vec![0.0; c.len()];
    let value = regression_with_grad(kind, c_hat, c, &mut grad);
    Ok((value, grad))
}

fn regression_with_grad(kind: SurrogateKind, c_hat: &[f64], c: &[f64], grad: &mut [f64]) -> f64 {
    let mut value = 0.0;
    for ((g, h), y) in grad.iter_mut().zip(c_hat).zip(c) {
        let r = h - y;
        match kind {
            SurrogateKind::Squared => {
                value += r * r;
                *g = 2.0 * r;
            }
            SurrogateKind::Mae => {
                value += r.abs();
                *g = if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
            SurrogateKind::Huber { delta } => {
                if r.abs() <= delta {
                    value += 0.5 * r * r;
                    *g = r;
                } else {
                    value += delta * (r.abs() - 0.5 * delta);
                    *g = delta * r.signum();
                }
            }
            SurrogateKind::Spo | SurrogateKind::SpoPlus => unreachable!("not a regression kind"),
        }
    }
    value
}

/// Value of any surrogate at `(c_hat, c)` with a descent direction written to
/// `grad`. For [`SurrogateKind::Spo`] the direction is the SPO+ subgradient.
///
/// Dimensions are assumed checked by the caller.
pub(crate) fn loss_with_grad(
    kind: SurrogateKind,
    poly: &Polytope,
    c_hat: &[f64],
    c: &[f64],
    grad: Option<&mut [f64]>,
) -> f64 {
    match kind {
        SurrogateKind::SpoPlus => spo_plus_with_grad(poly, c_hat, c, grad),
        SurrogateKind::Spo => {
            if let Some(g) = grad {
                spo_plus_with_grad(poly, c_hat, c, Some(g));
            }
            spo_unchecked(poly, c_hat, c)
        }
        _ => match grad {
            Some(g) => regression_with_grad(kind, c_hat, c, g),
            None => {
                let mut scratch = vec![0.0; c.len()];
                regression_with_grad(kind, c_hat, c, &mut scratch)
            }
        },
    }
}

/// Surrogate value for any kind.
pub fn surrogate_loss(kind: SurrogateKind, poly: &Polytope, c_hat: &[f64], c: &[f64]) -> Result<f64> {
    check_pair(poly, c_hat, c)?;
    kind.validate()?;
    Ok(loss_with_grad(kind, poly, c_hat, c, None))
}

/// Training objective of the stream learner:
///
/// ```text
/// (1/denom) * ( sum_{W} l(h(x), c) + (1/p_tilde) * sum_{W~} l(h(x), c) )
/// ```
pub fn reweighted_empirical_loss(
    kind: SurrogateKind,
    poly: &Polytope,
    predictor: &LinearPredictor,
    labeled: &[LabeledSample],
    soft_labeled: &[LabeledSample],
    p_tilde: f64,
    denom: f64,
) -> Result<f64> {
    validate_objective(labeled, soft_labeled, p_tilde, denom)?;
    kind.validate()?;
    let mut hard = 0.0;
    for s in labeled {
        hard += surrogate_loss(kind, poly, &predictor.predict(&s.x)?, &s.c)?;
    }
    let mut soft = 0.0;
    for s in soft_labeled {
        soft += surrogate_loss(kind, poly, &predictor.predict(&s.x)?, &s.c)?;
    }
    if soft_labeled.is_empty() {
        return Ok(hard / denom);
    }
    Ok((hard + soft / p_tilde) / denom)
}

pub(crate) fn validate_objective(
    labeled: &[LabeledSample],
    soft_labeled: &[LabeledSample],
    p_tilde: f64,
    denom: f64,
) -> Result<()> {
    if !soft_labeled.is_empty() && !(p_tilde > 0.0) {
        return Err(Error::Usage(
            "soft-labeled samples need a positive labeling probability".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p_tilde) {
        return Err(Error::InvalidInput(format!("p_tilde must lie in [0, 1], got {p_tilde}")));
    }
    let n = (labeled.len() + soft_labeled.len()) as f64;
    if n > 0.0 && !(denom >= n) {
        return Err(Error::InvalidInput(format!(
            "normalizer {denom} is smaller than the sample count {n}"
        )));
    }
    Ok(())
}
