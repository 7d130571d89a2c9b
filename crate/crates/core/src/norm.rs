//! Ordered norms `‖x‖ = Σ β_i (x↓)_i` and their duals.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, check_nonnegative, Error, Result};

/// Sorted, normalized weight vector defining an ordered norm.
///
/// Construction sorts the weights non-increasingly and rescales them to unit
/// `ℓ1` mass; [`WeightVector::was_normalized`] reports whether either step
/// changed the input.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    beta: Vec<f64>,
    prefix: Vec<f64>,
    normalized: bool,
}

impl WeightVector {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::Empty("weight vector"));
        }
        check_nonnegative(&beta)?;
        let mut sorted = beta.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = sorted.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroWeights);
        }
        if total != 1.0 {
            for b in &mut sorted {
                *b /= total;
            }
        }
        let normalized = sorted != beta;

        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &b in &sorted {
            // Zero weights keep the prefix flat so zero-mass segments stay exactly zero.
            if b > 0.0 {
                acc += b;
            }
            prefix.push(acc);
        }
        Ok(Self {
            beta: sorted,
            prefix,
            normalized,
        })
    }

    /// `ℓ∞`, i.e. `β = e_1`.
    pub fn linf(d: usize) -> Result<Self> {
        Self::top_k(d, 1)
    }

    /// `ℓ1 / d`.
    pub fn uniform(d: usize) -> Result<Self> {
        Self::top_k(d, d)
    }

    /// Normalized top-`k` norm: the average of the `k` largest entries.
    pub fn top_k(d: usize, k: usize) -> Result<Self> {
        if k == 0 || k > d {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: format!("top-k needs 1 <= k <= d, got k={k}, d={d}"),
            });
        }
        let mut beta = vec![0.0; d];
        for b in beta.iter_mut().take(k) {
            *b = 1.0 / k as f64;
        }
        Self::new(beta)
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Prefix sums `B_0 = 0, B_1, …, B_d`.
    pub fn prefix_sums(&self) -> &[f64] {
        &self.prefix
    }

    /// True when the input had to be sorted or rescaled.
    pub fn was_normalized(&self) -> bool {
        self.normalized
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_finite(x)?;
        let mut sorted: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        Ok(self.beta.iter().zip(&sorted).map(|(b, v)| b * v).sum())
    }

    /// Dual norm via the prefix-ratio formula `max_k (Σ_{i≤k} y↓_i) / B_k`.
    pub fn evaluate_dual(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        check_nonnegative(y)?;
        let mut sorted = y.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut best = 0.0f64;
        let mut acc = 0.0;
        for (k, v) in sorted.iter().enumerate() {
            acc += v;
            let bk = self.prefix[k + 1];
            if bk > 0.0 {
                best = best.max(acc / bk);
            }
        }
        Ok(best)
    }

    /// Coefficients `γ_k = k (β_k − β_{k+1})` of the top-`k` decomposition,
    /// listing only the strictly positive ones.
    pub fn topk_decomposition(&self) -> Vec<(usize, f64)> {
        let d = self.dim();
        (0..d)
            .filter_map(|i| {
                let next = if i + 1 < d { self.beta[i + 1] } else { 0.0 };
                let gamma = (i + 1) as f64 * (self.beta[i] - next);
                (gamma > 0.0).then_some((i + 1, gamma))
            })
            .collect()
    }
}

/// Nonnegative resource load.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadVector(Vec<f64>);

impl LoadVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_nonnegative(&values)?;
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn max_entry(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

impl Deref for LoadVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}
