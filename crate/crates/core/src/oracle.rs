//! Linear minimization oracles over customer feasible sets.

use std::fmt::Debug;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{check_dim, check_nonnegative, Error, Result};
use crate::norm::LoadVector;

/// Identifies which extreme point an oracle returned, so repeated answers can
/// be merged in a customer's convex combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    Vertex(usize),
    /// One edge-id path per sink, in sink order.
    Paths(Vec<Vec<usize>>),
    /// The oracle offers no identity; answers are never merged.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleAnswer {
    pub point: LoadVector,
    pub cost: f64,
    pub witness: Witness,
}

impl OracleAnswer {
    pub fn new(point: LoadVector, price: &[f64], witness: Witness) -> Self {
        let cost = dot(price, &point);
        Self {
            point,
            cost,
            witness,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rejects prices that are negative, non-finite or of the wrong length.
pub fn check_price(dim: usize, price: &[f64]) -> Result<()> {
    check_dim(dim, price.len())?;
    check_nonnegative(price)
}

/// Minimizes a nonnegative linear function over a closed convex set `X ⊆ R^d_{≥0}`.
///
/// Implementations must be deterministic functions of the price and safe to
/// call concurrently.
pub trait LinearOracle: Send + Sync + Debug {
    fn dim(&self) -> usize;

    fn min_linear(&self, price: &[f64]) -> Result<OracleAnswer>;

    /// Whether zero prices must be floored before calling [`min_linear`](Self::min_linear).
    fn requires_positive_prices(&self) -> bool {
        false
    }

    /// The explicit vertex list, when the set is given in that form.
    fn vertices(&self) -> Option<&[LoadVector]> {
        None
    }
}

/// `X = conv(vertices)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexListOracle {
    dim: usize,
    vertices: Vec<LoadVector>,
}

impl VertexListOracle {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::Empty("vertex list"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Empty("vertex"));
        }
        let vertices = vertices
            .into_iter()
            .map(|v| {
                check_dim(dim, v.len())?;
                LoadVector::new(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, vertices })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn costs(&self, price: &[f64]) -> Vec<f64> {
        self.vertices.iter().map(|v| dot(price, v)).collect()
    }
}

/// Index of the smallest cost; the lowest index wins ties.
fn argmin(costs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = i;
        }
    }
    best
}

impl LinearOracle for VertexListOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn min_linear(&self, price: &[f64]) -> Result<OracleAnswer> {
        check_price(self.dim, price)?;
        let costs = self.costs(price);
        let best = argmin(&costs);
        Ok(OracleAnswer {
            point: self.vertices[best].clone(),
            cost: costs[best],
            witness: Witness::Vertex(best),
        })
    }

    fn vertices(&self) -> Option<&[LoadVector]> {
        Some(&self.vertices)
    }
}

/// True iff the origin minimizes the uniform price, i.e. `0 ∈ X`.
pub fn detect_trivial(oracle: &dyn LinearOracle) -> Result<bool> {
    let answer = oracle.min_linear(&vec![1.0; oracle.dim()])?;
    Ok(answer.cost <= 0.0)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic 64-bit mix of a seed and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Test double that answers within a factor `τ` of the true minimum.
///
/// A coin derived from the seed and the exact price bits decides whether the
/// exact answer is forwarded or replaced by the cheapest strictly more
/// expensive vertex whose cost is still within `τ` of the minimum. The answer
/// therefore depends only on the price.
#[derive(Debug, Clone)]
pub struct ApproxOracleWrapper {
    inner: Arc<dyn LinearOracle>,
    tau: f64,
    seed: u64,
}

impl ApproxOracleWrapper {
    pub fn new(inner: Arc<dyn LinearOracle>, tau: f64, seed: u64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("must be at least 1, got {tau}"),
            });
        }
        Ok(Self { inner, tau, seed })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn coin(&self, price: &[f64]) -> bool {
        let h = price.iter().fold(splitmix64(self.seed), |acc, p| {
            splitmix64(acc ^ p.to_bits())
        });
        h & 1 == 1
    }
}

impl LinearOracle for ApproxOracleWrapper {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn min_linear(&self, price: &[f64]) -> Result<OracleAnswer> {
        let exact = self.inner.min_linear(price)?;
        let vertices = match self.inner.vertices() {
            Some(v) if self.tau > 1.0 && self.coin(price) => v,
            _ => return Ok(exact),
        };
        let limit = self.tau * exact.cost;
        let substitute = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (i, dot(price, v)))
            .filter(|&(_, c)| c > exact.cost && c <= limit)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        Ok(match substitute {
            Some((i, cost)) => OracleAnswer {
                point: vertices[i].clone(),
                cost,
                witness: Witness::Vertex(i),
            },
            None => exact,
        })
    }

    fn requires_positive_prices(&self) -> bool {
        self.inner.requires_positive_prices()
    }

    fn vertices(&self) -> Option<&[LoadVector]> {
        self.inner.vertices()
    }
}

/// Presents `factor · X` to the solver without touching the inner data.
#[derive(Debug, Clone)]
pub struct ScaledOracle {
    inner: Arc<dyn LinearOracle>,
    factor: f64,
}

impl ScaledOracle {
    pub fn new(inner: Arc<dyn LinearOracle>, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: format!("must be positive and finite, got {factor}"),
            });
        }
        Ok(Self { inner, factor })
    }
}

impl LinearOracle for ScaledOracle {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn min_linear(&self, price: &[f64]) -> Result<OracleAnswer> {
        let mut answer = self.inner.min_linear(price)?;
        answer
            .point
            .as_mut_slice()
            .iter_mut()
            .for_each(|v| *v *= self.factor);
        answer.cost *= self.factor;
        Ok(answer)
    }

    fn requires_positive_prices(&self) -> bool {
        self.inner.requires_positive_prices()
    }
}
