//! Relative-entropy projection onto the dual space `Y = conv{permutations of β}`.
//!
//! Inputs are log-weights `l_i = ln p_i`, so callers can project `exp(η x)`
//! for large `η x` without overflow. For sorted input the projected point is
//! piecewise proportional to `p`: the sorted index range splits into segments
//! `(i, j]` on which `y / p` equals the interval ratio
//! `φ(i, j) = (B_j − B_i) / (P_j − P_i)`, and these ratios increase from one
//! segment to the next. The segments are found with a pool-adjacent-violators
//! sweep, which together with the initial sort costs `O(d log d)`.

use std::ops::Deref;

use serde::Serialize;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::norm::WeightVector;

/// `ln(e^a + e^b)` without overflow.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-sum-exp of a slice, `−∞` for an empty one.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Natural logarithms of strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights(Vec<f64>);

impl LogWeights {
    pub fn new(logs: Vec<f64>) -> Result<Self> {
        check_finite(&logs)?;
        Ok(Self(logs))
    }

    /// Takes explicit weights `p > 0` and stores `ln p`.
    pub fn from_weights(p: &[f64]) -> Result<Self> {
        check_finite(p)?;
        if let Some(index) = p.iter().position(|&v| v <= 0.0) {
            return Err(Error::Negative {
                index,
                value: p[index],
            });
        }
        Ok(Self(p.iter().map(|v| v.ln()).collect()))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for LogWeights {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Projected point together with its segment structure.
///
/// `segments`, `log_ratios` and `ratios` refer to positions in sorted order;
/// `permutation[k]` is the original index of the `k`-th largest log-weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionResult {
    pub y: Vec<f64>,
    pub segments: Vec<usize>,
    pub log_ratios: Vec<f64>,
    pub ratios: Vec<f64>,
    pub permutation: Vec<usize>,
    #[serde(skip)]
    segment_mass: Vec<f64>,
}

impl ProjectionResult {
    pub fn segment_count(&self) -> usize {
        self.log_ratios.len()
    }

    /// `max_{y ∈ Y} ⟨l, y⟩ − Σ y_i ln y_i`, evaluated per segment as
    /// `−Σ_seg (B_j − B_i) · ln φ(i, j)`.
    pub fn conjugate_value(&self) -> f64 {
        self.segment_mass
            .iter()
            .zip(&self.log_ratios)
            .filter(|(mass, _)| **mass > 0.0)
            .map(|(mass, lr)| -mass * lr)
            .sum()
    }
}

/// Pooled segments in sorted order. `bounds` starts with 0, so segment `j`
/// spans `bounds[j]..bounds[j + 1]`.
struct Pooled {
    bounds: Vec<usize>,
    log_mass: Vec<f64>,
    log_ratio: Vec<f64>,
}

fn segment_log_ratio(prefix: &[f64], start: usize, end: usize, log_mass: f64) -> f64 {
    let b_mass = prefix[end] - prefix[start];
    if b_mass > 0.0 {
        b_mass.ln() - log_mass
    } else {
        f64::NEG_INFINITY
    }
}

fn pool_adjacent_violators(prefix: &[f64], len: usize, value: impl Fn(usize) -> f64) -> Pooled {
    let mut bounds = Vec::with_capacity(len + 1);
    bounds.push(0);
    let mut log_mass: Vec<f64> = Vec::with_capacity(len);
    let mut log_ratio: Vec<f64> = Vec::with_capacity(len);
    for i in 0..len {
        let mut mass = value(i);
        let mut ratio = segment_log_ratio(prefix, i, i + 1, mass);
        while let Some(&prev_ratio) = log_ratio.last() {
            if prev_ratio < ratio {
                break;
            }
            log_ratio.pop();
            bounds.pop();
            let prev_mass = log_mass.pop().expect("one mass per ratio");
            mass = log_add_exp(prev_mass, mass);
            ratio = segment_log_ratio(prefix, bounds[bounds.len() - 1], i + 1, mass);
        }
        bounds.push(i + 1);
        log_mass.push(mass);
        log_ratio.push(ratio);
    }
    Pooled {
        bounds,
        log_mass,
        log_ratio,
    }
}

/// Builds the result from pooled segments; `value(k)` and `index(k)` are the
/// log-weight and original index at sorted position `k`.
fn assemble(
    w: &WeightVector,
    pooled: Pooled,
    value: impl Fn(usize) -> f64,
    index: impl Fn(usize) -> usize,
    permutation: Vec<usize>,
) -> ProjectionResult {
    let prefix = w.prefix_sums();
    let Pooled {
        bounds,
        log_mass: mut segment_mass,
        log_ratio,
    } = pooled;
    let mut y = vec![0.0; permutation.len()];
    for (j, pair) in bounds.windows(2).enumerate() {
        let (start, end) = (pair[0], pair[1]);
        // same as exp(l_k + log_ratio), normalized so the segment carries its mass exactly
        let mass = prefix[end] - prefix[start];
        segment_mass[j] = mass;
        if mass > 0.0 && end == start + 1 {
            y[index(start)] = mass;
        } else if mass > 0.0 {
            let top = value(start);
            let total: f64 = (start..end).map(|k| (value(k) - top).exp()).sum();
            for k in start..end {
                y[index(k)] = mass * ((value(k) - top).exp() / total);
            }
        }
    }
    ProjectionResult {
        y,
        segments: bounds,
        ratios: log_ratio.iter().map(|v| v.exp()).collect(),
        log_ratios: log_ratio,
        permutation,
        segment_mass,
    }
}

/// Projection of already sorted (non-increasing) log-weights.
pub fn project_sorted(w: &WeightVector, l: &LogWeights) -> Result<ProjectionResult> {
    check_dim(w.dim(), l.len())?;
    if let Some(index) = l.windows(2).position(|p| p[1] > p[0]) {
        return Err(Error::Unsorted { index: index + 1 });
    }
    let pooled = pool_adjacent_violators(w.prefix_sums(), l.len(), |k| l[k]);
    Ok(assemble(w, pooled, |k| l[k], |k| k, (0..l.len()).collect()))
}

/// Projection of arbitrary log-weights. Ties are ordered by original index.
pub fn project(w: &WeightVector, l: &LogWeights) -> Result<ProjectionResult> {
    check_dim(w.dim(), l.len())?;
    // sorting (value, index) pairs keeps the comparisons cache-local; the
    // index tie-break makes the order equal to a stable sort
    let mut keyed: Vec<(f64, usize)> = l.iter().copied().zip(0..).collect();
    keyed.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let pooled = pool_adjacent_violators(w.prefix_sums(), keyed.len(), |k| keyed[k].0);
    let permutation = keyed.iter().map(|&(_, i)| i).collect();
    Ok(assemble(
        w,
        pooled,
        |k| keyed[k].0,
        |k| keyed[k].1,
        permutation,
    ))
}

/// Interval ratios `φ_p(i, j)` for sorted log-weights, evaluated in log space.
#[derive(Debug, Clone)]
pub struct IntervalRatios<'a> {
    prefix: &'a [f64],
    l: &'a [f64],
}

impl<'a> IntervalRatios<'a> {
    pub fn new(w: &'a WeightVector, l: &'a [f64]) -> Result<Self> {
        check_dim(w.dim(), l.len())?;
        Ok(Self {
            prefix: w.prefix_sums(),
            l,
        })
    }

    /// `ln(P_j − P_i)` for `0 ≤ i < j ≤ d`.
    pub fn log_mass(&self, i: usize, j: usize) -> f64 {
        log_sum_exp(&self.l[i..j])
    }

    pub fn log_ratio(&self, i: usize, j: usize) -> f64 {
        segment_log_ratio(self.prefix, i, j, self.log_mass(i, j))
    }

    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        self.log_ratio(i, j).exp()
    }
}

/// First condition of the projection characterization found violated.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Dimension {
        expected: usize,
        actual: usize,
    },
    InvalidEntry {
        index: usize,
        value: f64,
    },
    Sum {
        total: f64,
    },
    Prefix {
        position: usize,
        prefix: f64,
        bound: f64,
    },
    RatioDecrease {
        position: usize,
    },
    ChangeAtSlack {
        position: usize,
        slack: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacterizationReport {
    pub passed: bool,
    pub violation: Option<Violation>,
}

impl CharacterizationReport {
    fn fail(v: Violation) -> Self {
        Self {
            passed: false,
            violation: Some(v),
        }
    }
}

/// Tolerances used by [`check_characterization`].
#[derive(Debug, Clone, Copy)]
pub struct CheckTolerance {
    pub mass: f64,
    pub log_ratio: f64,
}

impl Default for CheckTolerance {
    fn default() -> Self {
        Self {
            mass: 1e-9,
            log_ratio: 1e-9,
        }
    }
}

/// Verifies that `y` is the projection of `exp(l)`: feasibility of every
/// prefix constraint in sorted order, non-decreasing ratios `y_i / p_i`, and
/// ratio changes only at tight constraints.
pub fn check_characterization(
    w: &WeightVector,
    l: &LogWeights,
    y: &[f64],
) -> CharacterizationReport {
    check_characterization_with(w, l, y, CheckTolerance::default())
}

pub fn check_characterization_with(
    w: &WeightVector,
    l: &LogWeights,
    y: &[f64],
    tol: CheckTolerance,
) -> CharacterizationReport {
    let d = w.dim();
    if l.len() != d || y.len() != d {
        return CharacterizationReport::fail(Violation::Dimension {
            expected: d,
            actual: if l.len() != d { l.len() } else { y.len() },
        });
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return CharacterizationReport::fail(Violation::InvalidEntry {
            index,
            value: y[index],
        });
    }
    let total: f64 = y.iter().sum();
    if (total - 1.0).abs() > tol.mass {
        return CharacterizationReport::fail(Violation::Sum { total });
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| l[b].total_cmp(&l[a]));
    let prefix = w.prefix_sums();
    let log_ratio = |k: usize| {
        let v = y[order[k]];
        if v > 0.0 {
            v.ln() - l[order[k]]
        } else {
            f64::NEG_INFINITY
        }
    };

    let mut acc = 0.0;
    for k in 0..d {
        acc += y[order[k]];
        if acc > prefix[k + 1] + tol.mass {
            return CharacterizationReport::fail(Violation::Prefix {
                position: k + 1,
                prefix: acc,
                bound: prefix[k + 1],
            });
        }
        if k + 1 < d {
            let (cur, next) = (log_ratio(k), log_ratio(k + 1));
            if next < cur - tol.log_ratio {
                return CharacterizationReport::fail(Violation::RatioDecrease { position: k + 1 });
            }
            let changed = if cur == f64::NEG_INFINITY {
                next > f64::NEG_INFINITY
            } else {
                next > cur + tol.log_ratio
            };
            let slack = prefix[k + 1] - acc;
            if changed && slack > tol.mass {
                return CharacterizationReport::fail(Violation::ChangeAtSlack {
                    position: k + 1,
                    slack,
                });
            }
        }
    }
    CharacterizationReport {
        passed: true,
        violation: None,
    }
}
