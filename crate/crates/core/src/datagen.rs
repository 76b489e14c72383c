//! Synthetic worlds: the monotone shortest path on a grid and personalized
//! pricing with monotone price constraints.
//!
//! Both worlds draw features from an equal-weight Gaussian mixture and labels
//! as `E[c|x]` scaled coordinate-wise by multiplicative noise
//! `U[1 - eps_bar, 1 + eps_bar]`, so `E[c|x]` is known in closed form.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hypothesis::TrainerConfig;
use crate::losses::{LabeledSample, SurrogateKind};
use crate::polytope::{dot, NormKind, Polytope};
use crate::rng::{self, Role};

// ---------------------------------------------------------------------------
// Grid shortest path
// ---------------------------------------------------------------------------

/// Number of edges in a `k x k` grid with north and east edges.
pub fn grid_edge_count(k: usize) -> usize {
    2 * k * (k - 1)
}

fn east_edge(k: usize, row: usize, col: usize) -> usize {
    row * (k - 1) + col
}

fn north_edge(k: usize, row: usize, col: usize) -> usize {
    k * (k - 1) + row * k + col
}

/// Polytope whose vertices are the edge-incidence vectors of all monotone
/// paths from the southwest corner `(0, 0)` to the northeast corner
/// `(k-1, k-1)` of a `k x k` grid.
///
/// Edges `0..k(k-1)` go east (`row * (k-1) + col`), the remaining ones go north
/// (`k(k-1) + row * k + col`). Paths are listed depth-first, east before north.
pub fn build_grid_polytope(k: usize) -> Result<Polytope> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("grid side must be at least 2, got {k}")));
    }
    let d = grid_edge_count(k);
    let mut paths = Vec::new();
    let mut current = vec![0.0; d];
    walk(k, 0, 0, &mut current, &mut paths);
    Polytope::new(format!("grid{k}x{k}"), paths)
}

fn walk(k: usize, row: usize, col: usize, current: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
    if row == k - 1 && col == k - 1 {
        out.push(current.clone());
        return;
    }
    if col + 1 < k {
        let e = east_edge(k, row, col);
        current[e] = 1.0;
        walk(k, row, col + 1, current, out);
        current[e] = 0.0;
    }
    if row + 1 < k {
        let e = north_edge(k, row, col);
        current[e] = 1.0;
        walk(k, row + 1, col, current, out);
        current[e] = 0.0;
    }
}

/// Reconstructs the node sequence of a path from its edge-incidence vector.
///
/// Returns `None` unless the vector is binary and traces a single monotone
/// walk from corner to corner using every selected edge.
pub fn decode_grid_path(k: usize, incidence: &[f64]) -> Option<Vec<(usize, usize)>> {
    if k < 2 || incidence.len() != grid_edge_count(k) {
        return None;
    }
    if incidence.iter().any(|&v| v != 0.0 && v != 1.0) {
        return None;
    }
    let (mut row, mut col) = (0, 0);
    let mut nodes = vec![(row, col)];
    let mut used = 0;
    while (row, col) != (k - 1, k - 1) {
        let east = col + 1 < k && incidence[east_edge(k, row, col)] == 1.0;
        let north = row + 1 < k && incidence[north_edge(k, row, col)] == 1.0;
        match (east, north) {
            (true, false) => col += 1,
            (false, true) => row += 1,
            _ => return None,
        }
        used += 1;
        nodes.push((row, col));
    }
    let selected = incidence.iter().filter(|&&v| v == 1.0).count();
    (selected == used).then_some(nodes)
}

/// Acceptance rule for the mixture centers of the shortest-path world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DegeneracyThreshold {
    /// `nu(E[c|mu]) >= factor * ||E[c|mu]||_2`.
    Relative { factor: f64 },
    Absolute { value: f64 },
}

impl Default for DegeneracyThreshold {
    fn default() -> Self {
        DegeneracyThreshold::Relative { factor: 0.1 }
    }
}

impl DegeneracyThreshold {
    fn bound(&self, mean: &[f64]) -> f64 {
        match *self {
            DegeneracyThreshold::Relative { factor } => factor * dot(mean, mean).sqrt(),
            DegeneracyThreshold::Absolute { value } => value,
        }
    }
}

/// Knobs of the shortest-path world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortestPathParams {
    /// Nodes per grid side.
    pub k: usize,
    /// Feature dimension.
    pub p: usize,
    /// Polynomial degree of the cost model; 1 keeps the world well specified.
    pub deg: u32,
    /// Variance of each mixture component.
    pub sigma_m2: f64,
    /// Label noise level.
    pub eps_bar: f64,
    pub threshold: DegeneracyThreshold,
    /// Number of mixture centers (capped by the number of paths).
    pub num_centers: usize,
    /// Candidate centers tried per target path.
    pub center_budget: usize,
    /// Coefficient matrices tried before giving up.
    pub matrix_budget: usize,
}

impl Default for ShortestPathParams {
    fn default() -> Self {
        ShortestPathParams {
            k: 3,
            p: 5,
            deg: 1,
            sigma_m2: 1.0 / 9.0,
            eps_bar: 0.5,
            threshold: DegeneracyThreshold::default(),
            num_centers: 6,
            center_budget: 10_000,
            matrix_budget: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortestPathScenario {
    pub params: ShortestPathParams,
    pub seed: u64,
    /// `d x p` binary coefficient matrix, one row per edge.
    pub coefficients: Vec<Vec<f64>>,
    /// Mixture centers `mu_j`.
    pub centers: Vec<Vec<f64>>,
    /// Vertex index that each center's conditional mean selects.
    pub target_paths: Vec<usize>,
    /// Number of coefficient matrices drawn before one admitted every center.
    pub matrices_tried: usize,
    pub polytope: Polytope,
}

impl ShortestPathScenario {
    /// `E[c_j | x] = 1 + (1 + b_j.x / sqrt(p))^deg`.
    fn mean_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let scale = (self.params.p as f64).sqrt();
        self.coefficients
            .iter()
            .map(|b| 1.0 + (1.0 + dot(b, x) / scale).powi(self.params.deg as i32))
            .collect()
    }
}

/// Draws the shortest-path world.
///
/// A binary coefficient matrix is drawn entrywise Bernoulli(0.5) until, for
/// each target path, a standard normal candidate center is found whose
/// conditional mean selects that path and sits at least the threshold away
/// from degeneracy.
pub fn gen_shortest_path_scenario(seed: u64, params: ShortestPathParams) -> Result<ShortestPathScenario> {
    if params.p == 0 {
        return Err(Error::InvalidInput("feature dimension must be positive".into()));
    }
    if !(params.sigma_m2 >= 0.0) || !(0.0..=1.0).contains(&params.eps_bar) {
        return Err(Error::InvalidInput("sigma_m2 must be >= 0 and eps_bar in [0, 1]".into()));
    }
    if params.deg == 0 || params.num_centers == 0 {
        return Err(Error::InvalidInput("deg and num_centers must be positive".into()));
    }
    let polytope = build_grid_polytope(params.k)?;
    let d = polytope.dim();
    let mut rng = rng::stream(seed, 0, Role::Scenario);

    let k_paths = polytope.num_vertices();
    let n_targets = params.num_centers.min(k_paths);
    let cover_all = n_targets == k_paths;

    let coin = Bernoulli::new(0.5).expect("valid probability");
    let mut failures = Vec::new();
    for attempt in 1..=params.matrix_budget {
        let coefficients: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..params.p).map(|_| if coin.sample(&mut rng) { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut scenario = ShortestPathScenario {
            params,
            seed,
            coefficients,
            centers: Vec::with_capacity(n_targets),
            target_paths: Vec::with_capacity(n_targets),
            matrices_tried: attempt,
            polytope: polytope.clone(),
        };
        // Returns the path selected by a fresh candidate center when the
        // candidate clears the degeneracy threshold.
        let mut candidate = |scn: &ShortestPathScenario| {
            let mu: Vec<f64> = (0..params.p).map(|_| rng.sample(StandardNormal)).collect();
            let mean = scn.mean_unchecked(&mu);
            let nu = polytope.nu(&mean, NormKind::L2, None);
            (nu >= params.threshold.bound(&mean)).then(|| (polytope.argmin(&mean).index, mu))
        };
        let complete = if cover_all {
            // One center per path, searched path by path.
            let mut ok = true;
            for path in 0..k_paths {
                let found = (0..params.center_budget)
                    .find_map(|_| candidate(&scenario).filter(|(j, _)| *j == path));
                match found {
                    Some((j, mu)) => {
                        scenario.target_paths.push(j);
                        scenario.centers.push(mu);
                    }
                    None => {
                        failures.push(format!("path {path}"));
                        ok = false;
                        break;
                    }
                }
            }
            ok
        } else {
            // Distinct paths in order of discovery, i.e. a random subset of
            // the paths the cost model can select with a margin.
            let mut found: Vec<(usize, Vec<f64>)> = Vec::with_capacity(n_targets);
            for _ in 0..params.center_budget * n_targets {
                if let Some((j, mu)) = candidate(&scenario) {
                    if found.iter().all(|(k, _)| *k != j) {
                        found.push((j, mu));
                        if found.len() == n_targets {
                            break;
                        }
                    }
                }
            }
            if found.len() < n_targets {
                failures.push(format!("{} of {n_targets} paths", found.len()));
            }
            found.sort_by_key(|(j, _)| *j);
            for (j, mu) in found {
                scenario.target_paths.push(j);
                scenario.centers.push(mu);
            }
            scenario.centers.len() == n_targets
        };
        if complete {
            return Ok(scenario);
        }
    }
    Err(Error::SearchExhausted(format!(
        "no coefficient matrix out of {} admitted a center for every target; \
         per attempt: {}",
        params.matrix_budget,
        failures.join(", ")
    )))
}

// ---------------------------------------------------------------------------
// Personalized pricing
// ---------------------------------------------------------------------------

pub const PRICES: [f64; 3] = [60.0, 80.0, 90.0];
/// Price-elasticity levels `a_1, a_2, a_3`.
pub const ELASTICITY: [f64; 3] = [-0.0202733, -0.0133531, -0.00540672];
/// Base demand levels `b_1, b_2, b_3`.
pub const BASE: [f64; 3] = [-1.19155, -1.45748, -1.22819];
/// Level indices `(l_1, ..., l_6)` of each center: the first three
/// coordinates take `BASE[l]`, the last three `ELASTICITY[l]`.
const CENTER_LEVELS: [[usize; 3]; 7] = [
    [0, 0, 0],
    [0, 1, 2],
    [2, 2, 2],
    [1, 1, 1],
    [0, 0, 1],
    [1, 2, 2],
    [0, 0, 2],
];

pub const NUM_ITEMS: usize = 3;
pub const PRICING_FEATURES: usize = 6;

/// Coordinate of `(item, price level)` in the 9-dimensional cost vector.
pub fn pricing_index(item: usize, price: usize) -> usize {
    item * PRICES.len() + price
}

/// One-price-per-item assignments with non-decreasing prices across items,
/// in lexicographic order of the price levels.
pub fn build_pricing_polytope() -> Polytope {
    let n = PRICES.len();
    let mut vertices = Vec::new();
    for p1 in 0..n {
        for p2 in p1..n {
            for p3 in p2..n {
                let mut w = vec![0.0; NUM_ITEMS * n];
                for (item, level) in [p1, p2, p3].into_iter().enumerate() {
                    w[pricing_index(item, level)] = 1.0;
                }
                vertices.push(w);
            }
        }
    }
    Polytope::new("pricing", vertices).expect("pricing vertices are distinct")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingParams {
    pub feature_sd: f64,
    pub eps_bar: f64,
    /// One noise draw per item shared by its three prices instead of one per
    /// `(item, price)` entry.
    pub shared_item_noise: bool,
}

impl Default for PricingParams {
    fn default() -> Self {
        PricingParams {
            feature_sd: 0.01,
            eps_bar: 0.1,
            shared_item_noise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingScenario {
    pub params: PricingParams,
    pub seed: u64,
    pub prices: Vec<f64>,
    pub elasticity_levels: Vec<f64>,
    pub base_levels: Vec<f64>,
    /// `A_j`: selects the elasticity feature of item `j`.
    pub elasticity_loadings: Vec<Vec<f64>>,
    /// `B_j`: selects the base-demand feature of item `j`.
    pub base_loadings: Vec<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
    pub polytope: Polytope,
}

pub fn gen_pricing_scenario(seed: u64, params: PricingParams) -> Result<PricingScenario> {
    if !(params.feature_sd >= 0.0) || !(0.0..=1.0).contains(&params.eps_bar) {
        return Err(Error::InvalidInput("feature_sd must be >= 0 and eps_bar in [0, 1]".into()));
    }
    let unit = |i: usize| {
        let mut v = vec![0.0; PRICING_FEATURES];
        v[i] = 1.0;
        v
    };
    let centers = CENTER_LEVELS
        .iter()
        .map(|levels| {
            let mut mu: Vec<f64> = levels.iter().map(|&l| BASE[l]).collect();
            mu.extend(levels.iter().map(|&l| ELASTICITY[l]));
            mu
        })
        .collect();
    Ok(PricingScenario {
        params,
        seed,
        prices: PRICES.to_vec(),
        elasticity_levels: ELASTICITY.to_vec(),
        base_levels: BASE.to_vec(),
        elasticity_loadings: (0..NUM_ITEMS).map(|j| unit(NUM_ITEMS + j)).collect(),
        base_loadings: (0..NUM_ITEMS).map(unit).collect(),
        centers,
        polytope: build_pricing_polytope(),
    })
}

impl PricingScenario {
    /// Purchase probability `exp(B_j.x + A_j.x * price)` without noise.
    pub fn demand(&self, x: &[f64], item: usize, price: f64) -> f64 {
        (dot(&self.base_loadings[item], x) + dot(&self.elasticity_loadings[item], x) * price).exp()
    }

    /// Negated expected revenue of every `(item, price)` pair.
    fn mean_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; NUM_ITEMS * self.prices.len()];
        for item in 0..NUM_ITEMS {
            for (level, &price) in self.prices.iter().enumerate() {
                c[pricing_index(item, level)] = -price * self.demand(x, item, price);
            }
        }
        c
    }
}

// ---------------------------------------------------------------------------
// Common interface
// ---------------------------------------------------------------------------

/// A generative world: feature mixture, true conditional mean and noise law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "kebab-case")]
pub enum Scenario {
    ShortestPath(ShortestPathScenario),
    Pricing(PricingScenario),
}

impl Scenario {
    pub fn problem(&self) -> &'static str {
        match self {
            Scenario::ShortestPath(_) => "shortest-path",
            Scenario::Pricing(_) => "pricing",
        }
    }

    /// Trainer settings used by default for this world and surrogate.
    ///
    /// Step sizes were picked by the supervised learner's excess risk at 35
    /// labels. Losses with bounded gradients (MAE, Huber) need longer steps
    /// to move the intercept to the cost scale. The pricing features are
    /// badly conditioned, so descent there runs on standardized features.
    pub fn default_trainer(&self, kind: SurrogateKind) -> TrainerConfig {
        let base = TrainerConfig::default();
        match self {
            Scenario::ShortestPath(_) => match kind {
                SurrogateKind::Mae | SurrogateKind::Huber { .. } => TrainerConfig { step_size: 0.01, ..base },
                _ => base,
            },
            Scenario::Pricing(_) => TrainerConfig {
                step_size: 0.03,
                standardize: true,
                ..base
            },
        }
    }

    pub fn polytope(&self) -> &Polytope {
        match self {
            Scenario::ShortestPath(s) => &s.polytope,
            Scenario::Pricing(s) => &s.polytope,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Scenario::ShortestPath(s) => s.params.p,
            Scenario::Pricing(_) => PRICING_FEATURES,
        }
    }

    pub fn cost_dim(&self) -> usize {
        self.polytope().dim()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        match self {
            Scenario::ShortestPath(s) => &s.centers,
            Scenario::Pricing(s) => &s.centers,
        }
    }

    pub fn eps_bar(&self) -> f64 {
        match self {
            Scenario::ShortestPath(s) => s.params.eps_bar,
            Scenario::Pricing(s) => s.params.eps_bar,
        }
    }

    fn feature_sd(&self) -> f64 {
        match self {
            Scenario::ShortestPath(s) => s.params.sigma_m2.sqrt(),
            Scenario::Pricing(s) => s.params.feature_sd,
        }
    }

    /// Mixture component of the last draw is not exposed; use
    /// [`Scenario::sample_x_with_component`] when it matters.
    pub fn sample_x<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_x_with_component(rng).0
    }

    pub fn sample_x_with_component<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, usize) {
        let centers = self.centers();
        let j = rng.random_range(0..centers.len());
        let sd = self.feature_sd();
        let x = centers[j]
            .iter()
            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (x, j)
    }

    /// `E[c | x]`.
    pub fn conditional_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.feature_dim(), x.len())?;
        Ok(self.mean_unchecked(x))
    }

    pub(crate) fn mean_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Scenario::ShortestPath(s) => s.mean_unchecked(x),
            Scenario::Pricing(s) => s.mean_unchecked(x),
        }
    }

    /// Multiplicative noise factors, one per cost coordinate.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let eps = self.eps_bar();
        let d = self.cost_dim();
        if eps == 0.0 {
            return vec![1.0; d];
        }
        let u = Uniform::new_inclusive(1.0 - eps, 1.0 + eps).expect("valid noise range");
        match self {
            Scenario::Pricing(s) if s.params.shared_item_noise => {
                let levels = s.prices.len();
                let per_item: Vec<f64> = (0..NUM_ITEMS).map(|_| u.sample(rng)).collect();
                (0..d).map(|i| per_item[i / levels]).collect()
            }
            _ => (0..d).map(|_| u.sample(rng)).collect(),
        }
    }

    /// Realized label for `x` given noise factors from [`Scenario::sample_noise`].
    pub fn label_with_noise(&self, x: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cost_dim(), noise.len())?;
        let mut c = self.conditional_mean(x)?;
        for (ci, e) in c.iter_mut().zip(noise) {
            *ci *= e;
        }
        Ok(c)
    }

    /// Draws a labeled pair `(x, c)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample {
        let x = self.sample_x(rng);
        let noise = self.sample_noise(rng);
        let c = self.label_with_noise(&x, &noise).expect("dimensions are consistent");
        LabeledSample { x, c }
    }

    /// Minimum over the mixture centers of `nu(E[c | mu])`.
    pub fn min_center_margin(&self) -> f64 {
        let poly = self.polytope();
        self.centers()
            .iter()
            .map(|mu| poly.nu(&self.mean_unchecked(mu), NormKind::L2, None))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

// ---------------------------------------------------------------------------
// Margin-condition test distributions
// ---------------------------------------------------------------------------

/// Uniform draw from the closed unit ball of `R^d`.
pub fn sample_unit_ball<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dot(&v, &v).sqrt();
    let radius: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    for x in &mut v {
        *x *= radius / norm;
    }
    v
}

/// Rescales `u` by `nu(u)^(1/kappa - 1)` (and maps degenerate `u` to 0), which
/// induces a distribution whose near-degeneracy function is of order `b^kappa`.
pub fn margin_transform(poly: &Polytope, u: &[f64], kappa: f64) -> Result<Vec<f64>> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    let nu = poly.distance_to_degeneracy(u, NormKind::L2, None)?;
    if nu == 0.0 {
        return Ok(vec![0.0; u.len()]);
    }
    let scale = nu.powf(1.0 / kappa - 1.0);
    Ok(u.iter().map(|x| x * scale).collect())
}
