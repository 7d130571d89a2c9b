//! Independent projection oracle: interior-point Newton on the all-subsets
//! description `Σ_{i∈S} y_i ≤ B_{|S|}` of the dual space.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::norm::WeightVector;

pub const MAX_BRUTE_DIM: usize = 8;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

struct Barrier {
    log_p: Vec<f64>,
    /// (member mask, bound) for every proper nonempty subset with `B_{|S|} < 1`.
    constraints: Vec<(u32, f64)>,
    d: usize,
}

impl Barrier {
    fn slack(&self, y: &[f64], mask: u32, bound: f64) -> f64 {
        let sum: f64 = (0..self.d)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| y[i])
            .sum();
        bound - sum
    }

    fn interior(&self, y: &[f64]) -> bool {
        y.iter().all(|&v| v > 0.0)
            && self
                .constraints
                .iter()
                .all(|&(m, b)| self.slack(y, m, b) > 0.0)
    }

    fn value(&self, y: &[f64], mu: f64) -> f64 {
        let entropy: f64 = y
            .iter()
            .zip(&self.log_p)
            .map(|(v, lp)| v * (v.ln() - lp))
            .sum();
        let barrier: f64 = self
            .constraints
            .iter()
            .map(|&(m, b)| self.slack(y, m, b).ln())
            .sum();
        entropy - mu * barrier
    }

    fn newton_step(&self, y: &[f64], mu: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.d;
        let mut g: Vec<f64> = y
            .iter()
            .zip(&self.log_p)
            .map(|(v, lp)| v.ln() - lp + 1.0)
            .collect();
        let mut h = vec![vec![0.0; d + 1]; d + 1];
        for i in 0..d {
            h[i][i] = 1.0 / y[i];
        }
        for &(mask, bound) in &self.constraints {
            let s = self.slack(y, mask, bound);
            let members: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
            for &i in &members {
                g[i] += mu / s;
                for &j in &members {
                    h[i][j] += mu / (s * s);
                }
            }
        }
        for i in 0..d {
            h[i][d] = 1.0;
            h[d][i] = 1.0;
        }
        let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        rhs.push(0.0);
        let mut step = solve_dense(h, rhs)?;
        step.truncate(d);
        Some((step, g))
    }
}

/// Minimizes `Σ y_i ln(y_i / p_i)` over the dual space of `weights` with a
/// log-barrier path `μ = 1, 10⁻¹, …, 10⁻¹⁵`. Fails with `NotConverged` when
/// the last two path points differ by more than `1e-9`.
pub fn brute_force_project(weights: &WeightVector, p: &[f64]) -> Result<Vec<f64>> {
    let d = weights.dim();
    if d > MAX_BRUTE_DIM {
        return Err(Error::TooLarge(format!(
            "brute-force projection supports d <= {MAX_BRUTE_DIM}, got {d}"
        )));
    }
    crate::error::check_dim(d, p.len())?;
    crate::error::check_nonnegative(p)?;
    if let Some(index) = p.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("entry {index} must be positive"),
        });
    }
    let prefix = weights.prefix_sums();
    let uniform = 1.0 / d as f64;
    if (1..d).all(|k| prefix[k] <= k as f64 * uniform + 1e-15) {
        // Y is the single point 1/d
        return Ok(vec![uniform; d]);
    }
    let constraints: Vec<(u32, f64)> = (1u32..(1 << d) - 1)
        .map(|mask| (mask, prefix[mask.count_ones() as usize]))
        .filter(|&(_, b)| b < 1.0)
        .collect();
    let barrier = Barrier {
        log_p: p.iter().map(|v| v.ln()).collect(),
        constraints,
        d,
    };
    let mut y = vec![uniform; d];
    let mut previous = y.clone();
    let mut change = f64::INFINITY;
    for e in 0..=15 {
        let mu = 10f64.powi(-e);
        for _ in 0..200 {
            let Some((step, g)) = barrier.newton_step(&y, mu) else {
                break;
            };
            let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            if -slope < 1e-20 {
                break;
            }
            let f0 = barrier.value(&y, mu);
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-12 {
                let cand: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + t * b).collect();
                if barrier.interior(&cand) && barrier.value(&cand, mu) <= f0 + 0.25 * t * slope {
                    y = cand;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        change = y
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        previous.clone_from(&y);
    }
    if change > 1e-9 {
        return Err(Error::NotConverged(format!(
            "barrier path still moving by {change:e}"
        )));
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(beta: &[f64]) -> WeightVector {
        WeightVector::new(beta.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn examples() {
        let y = brute_force_project(&w(&[1.0, 0.0]), &[3.0, 1.0]).unwrap();
        assert!(close(&y, &[0.75, 0.25], 1e-7), "{y:?}");
        let y = brute_force_project(&w(&[0.7, 0.3]), &[4.0, 1.0]).unwrap();
        assert!(close(&y, &[0.7, 0.3], 1e-7), "{y:?}");
        let y = brute_force_project(&w(&[0.5, 0.5]), &[9.0, 1.0]).unwrap();
        assert_eq!(y, vec![0.5, 0.5]);
        let y = brute_force_project(&w(&[0.7, 0.3]), &[1.0, 1.0]).unwrap();
        assert!(close(&y, &[0.5, 0.5], 1e-7), "{y:?}");
    }

    #[test]
    fn rejects_large_or_nonpositive_input() {
        assert!(brute_force_project(&WeightVector::linf(9).unwrap(), &[1.0; 9]).is_err());
        assert!(brute_force_project(&w(&[0.7, 0.3]), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn dense_solver() {
        let x = solve_dense(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }
}
