//! Vertex-represented polytopes and the linear optimization oracle.
//!
//! A [`Polytope`] is stored as its list of extreme points. Minimizing a linear
//! objective over it is an exact enumeration, which also gives the distance to
//! degeneracy of a cost vector in closed form:
//!
//! ```text
//! nu(c) = min_{v_j != w*(c)}  c.(v_j - w*(c)) / ||v_j - w*(c)||_*
//! ```
//!
//! i.e. the smallest normalized objective gap between the optimal vertex and any
//! other vertex. A perturbation of `c` smaller than `nu(c)` cannot change the
//! optimal vertex.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Norm used to measure distances between cost vectors.
///
/// Cost vectors are measured in the primal norm; the denominator of the
/// distance to degeneracy uses its dual, applied to vertex differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    L2,
}

impl NormKind {
    pub fn norm(&self, v: &[f64]) -> f64 {
        match self {
            NormKind::L2 => dot(v, v).sqrt(),
        }
    }

    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match self {
            // self-dual
            NormKind::L2 => dot(v, v).sqrt(),
        }
    }

    /// The dual of the dual norm.
    pub fn dual(&self) -> NormKind {
        *self
    }
}

/// Result of the linear optimization oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoSolution {
    /// Index of the optimal vertex (lowest index among ties).
    pub index: usize,
    /// Optimal objective value `c.w*`.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolytopeDoc {
    name: String,
    d: usize,
    vertices: Vec<Vec<f64>>,
}

/// Polytope `conv(v_1, ..., v_K)` in `R^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PolytopeDoc", into = "PolytopeDoc")]
pub struct Polytope {
    name: String,
    dim: usize,
    vertices: Vec<Vec<f64>>,
    /// `edge_len[i * K + j] = ||v_i - v_j||_2`.
    edge_len: Vec<f64>,
}

impl TryFrom<PolytopeDoc> for Polytope {
    type Error = Error;

    fn try_from(doc: PolytopeDoc) -> Result<Self> {
        let p = Polytope::new(doc.name, doc.vertices)?;
        check_dim(doc.d, p.dim)?;
        Ok(p)
    }
}

impl From<Polytope> for PolytopeDoc {
    fn from(p: Polytope) -> Self {
        PolytopeDoc {
            name: p.name,
            d: p.dim,
            vertices: p.vertices,
        }
    }
}

impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.dim == other.dim && self.vertices == other.vertices
    }
}

impl Polytope {
    /// Builds a polytope from its extreme points.
    ///
    /// Rejects an empty vertex list, ragged or non-finite vertices, and
    /// duplicated vertices.
    pub fn new(name: impl Into<String>, vertices: Vec<Vec<f64>>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidInput("polytope needs at least one vertex".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidInput("polytope dimension must be positive".into()));
        }
        for v in &vertices {
            check_dim(dim, v.len())?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("vertex has a non-finite entry".into()));
            }
        }
        let k = vertices.len();
        let mut edge_len = vec![0.0; k * k];
        for i in 0..k {
            for j in (i + 1)..k {
                let dist = vertices[i]
                    .iter()
                    .zip(&vertices[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist == 0.0 {
                    return Err(Error::InvalidInput(format!("vertices {i} and {j} coincide")));
                }
                edge_len[i * k + j] = dist;
                edge_len[j * k + i] = dist;
            }
        }
        Ok(Polytope {
            name: name.into(),
            dim,
            vertices,
            edge_len,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, index: usize) -> &[f64] {
        &self.vertices[index]
    }

    /// Largest pairwise Euclidean distance between vertices.
    pub fn diameter(&self) -> f64 {
        self.edge_len.iter().copied().fold(0.0, f64::max)
    }

    /// Minimizes `c.w` over the vertices, breaking ties by lowest index.
    pub fn solve_lo(&self, c: &[f64]) -> Result<LoSolution> {
        check_dim(self.dim, c.len())?;
        Ok(self.argmin(c))
    }

    pub(crate) fn argmin(&self, c: &[f64]) -> LoSolution {
        let mut best = LoSolution {
            index: 0,
            value: dot(c, &self.vertices[0]),
        };
        for (i, v) in self.vertices.iter().enumerate().skip(1) {
            let value = dot(c, v);
            if value < best.value {
                best = LoSolution { index: i, value };
            }
        }
        best
    }

    pub(crate) fn max_value(&self, c: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(c, v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distance from `c` to the nearest degenerate cost vector.
    ///
    /// With `neighbors` set, the minimum only ranges over the listed neighbors
    /// of the optimal vertex (`neighbors[i]` lists the vertices adjacent to
    /// vertex `i`). That restriction can only overestimate the distance.
    /// Returns `f64::INFINITY` for a single-vertex polytope.
    pub fn distance_to_degeneracy(
        &self,
        c: &[f64],
        norm: NormKind,
        neighbors: Option<&[Vec<usize>]>,
    ) -> Result<f64> {
        check_dim(self.dim, c.len())?;
        if let Some(adj) = neighbors {
            if adj.len() != self.num_vertices() {
                return Err(Error::InvalidInput(format!(
                    "adjacency list has {} entries for {} vertices",
                    adj.len(),
                    self.num_vertices()
                )));
            }
            if adj.iter().flatten().any(|&j| j >= self.num_vertices()) {
                return Err(Error::InvalidInput("adjacency index out of range".into()));
            }
        }
        Ok(self.nu(c, norm, neighbors))
    }

    pub(crate) fn nu(&self, c: &[f64], norm: NormKind, neighbors: Option<&[Vec<usize>]>) -> f64 {
        let sol = self.argmin(c);
        let k = self.num_vertices();
        let gap = |j: usize| {
            let denom = match norm {
                NormKind::L2 => self.edge_len[sol.index * k + j],
            };
            ((dot(c, &self.vertices[j]) - sol.value) / denom).max(0.0)
        };
        match neighbors {
            Some(adj) => adj[sol.index]
                .iter()
                .filter(|&&j| j != sol.index)
                .map(|&j| gap(j))
                .fold(f64::INFINITY, f64::min),
            None => (0..k)
                .filter(|&j| j != sol.index)
                .map(gap)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Index `j != w*(c)` realizing the distance to degeneracy, if any.
    pub fn nearest_competitor(&self, c: &[f64], norm: NormKind) -> Result<Option<usize>> {
        check_dim(self.dim, c.len())?;
        let sol = self.argmin(c);
        let k = self.num_vertices();
        let mut best: Option<(usize, f64)> = None;
        for j in (0..k).filter(|&j| j != sol.index) {
            let denom = match norm {
                NormKind::L2 => self.edge_len[sol.index * k + j],
            };
            let g = (dot(c, &self.vertices[j]) - sol.value) / denom;
            if best.is_none_or(|(_, b)| g < b) {
                best = Some((j, g));
            }
        }
        Ok(best.map(|(j, _)| j))
    }

    /// Linear optimization gap `max_w c.w - min_w c.w`.
    pub fn lin_opt_gap(&self, c: &[f64]) -> Result<f64> {
        check_dim(self.dim, c.len())?;
        Ok(self.max_value(c) - self.argmin(c).value)
    }
}
