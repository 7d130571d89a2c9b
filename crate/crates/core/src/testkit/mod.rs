//! Reference oracles and generators for tests: exact optimum by linear
//! programming, brute-force projection, grid searches, finite differences
//! and seeded random instances.

mod brute;
mod simplex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::io::{CustomerSpec, InstanceFile};
use crate::norm::WeightVector;

pub use self::brute::{brute_force_project, MAX_BRUTE_DIM};
pub use self::simplex::{solve_lp, solve_lp_from_basis, LinearProgram, LpSolution, LpStatus};

/// Central differences `(f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptStatus {
    Optimal,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactOptResult {
    pub opt_value: f64,
    /// Convex-combination coefficients per customer, one per vertex.
    pub witness: Vec<Vec<f64>>,
    pub status: OptStatus,
}

impl ExactOptResult {
    /// `Σ_c Σ_v λ_{c,v} v`.
    pub fn point(&self, customers: &[Vec<Vec<f64>>]) -> Vec<f64> {
        let d = customers
            .first()
            .and_then(|c| c.first())
            .map_or(0, Vec::len);
        let mut x = vec![0.0; d];
        for (lambdas, vertices) in self.witness.iter().zip(customers) {
            for (l, v) in lambdas.iter().zip(vertices) {
                for (acc, value) in x.iter_mut().zip(v) {
                    *acc += l * value;
                }
            }
        }
        x
    }
}

pub const MAX_LP_VERTICES: usize = 200;
pub const MAX_LP_DIM: usize = 50;

/// `min ‖Σ_c x_c‖_β` over vertex-list customers, through the linear program
/// `top-k(x) = min_t k t + Σ_i max(x_i − t, 0)` applied to each term of the
/// top-k decomposition of β.
pub fn exact_opt_lists(
    weights: &WeightVector,
    customers: &[Vec<Vec<f64>>],
) -> Result<ExactOptResult> {
    let d = weights.dim();
    let total: usize = customers.iter().map(Vec::len).sum();
    if total > MAX_LP_VERTICES || d > MAX_LP_DIM {
        return Err(Error::TooLarge(format!(
            "{total} vertices in dimension {d} (limits {MAX_LP_VERTICES}, {MAX_LP_DIM})"
        )));
    }
    if customers.is_empty() || customers.iter().any(Vec::is_empty) {
        return Err(Error::Empty("vertex list"));
    }
    for c in customers {
        for v in c {
            crate::error::check_dim(d, v.len())?;
            crate::error::check_nonnegative(v)?;
        }
    }
    let terms: Vec<(usize, f64)> = weights
        .topk_decomposition()
        .into_iter()
        .filter(|&(_, g)| g > 0.0)
        .map(|(k, g)| (k, g / k as f64))
        .collect();
    let kd = terms.len() * d;
    // columns: λ (total), t_k, z_{k,i}, s_{k,i}
    let cols = total + terms.len() + 2 * kd;
    let (t0, z0, s0) = (total, total + terms.len(), total + terms.len() + kd);
    let mut a = Vec::with_capacity(customers.len() + kd);
    let mut b = Vec::with_capacity(customers.len() + kd);
    let mut offset = 0;
    for c in customers {
        let mut row = vec![0.0; cols];
        row[offset..offset + c.len()]
            .iter_mut()
            .for_each(|v| *v = 1.0);
        offset += c.len();
        a.push(row);
        b.push(1.0);
    }
    for (ki, _) in terms.iter().enumerate() {
        for i in 0..d {
            // z_{k,i} + t_k − x_i − s_{k,i} = 0
            let mut row = vec![0.0; cols];
            let mut col = 0;
            for c in customers {
                for v in c {
                    row[col] = -v[i];
                    col += 1;
                }
            }
            row[t0 + ki] = 1.0;
            row[z0 + ki * d + i] = 1.0;
            row[s0 + ki * d + i] = -1.0;
            a.push(row);
            b.push(0.0);
        }
    }
    let mut c = vec![0.0; cols];
    for (ki, &(k, coef)) in terms.iter().enumerate() {
        c[t0 + ki] = coef * k as f64;
        for i in 0..d {
            c[z0 + ki * d + i] = coef;
        }
    }
    // feasible start: each customer's first vertex, t = 0, s = 0, z = x
    let mut basis = Vec::with_capacity(customers.len() + kd);
    let mut offset = 0;
    for cust in customers {
        basis.push(offset);
        offset += cust.len();
    }
    basis.extend(z0..z0 + kd);
    let solution = solve_lp_from_basis(&LinearProgram { a, b, c }, &basis, 100_000);
    if solution.status != LpStatus::Optimal {
        log::warn!("reference LP ended with {:?}", solution.status);
        return Ok(ExactOptResult {
            opt_value: f64::NAN,
            witness: Vec::new(),
            status: OptStatus::Failed,
        });
    }
    let mut witness = Vec::with_capacity(customers.len());
    let mut offset = 0;
    for cust in customers {
        witness.push(solution.x[offset..offset + cust.len()].to_vec());
        offset += cust.len();
    }
    Ok(ExactOptResult {
        opt_value: solution.value,
        witness,
        status: OptStatus::Optimal,
    })
}

/// Vertex lists of every customer, when all oracles expose them.
pub fn vertex_lists(instance: &Instance) -> Result<Vec<Vec<Vec<f64>>>> {
    instance
        .customers()
        .iter()
        .map(|c| {
            c.oracle()
                .vertices()
                .map(|v| v.iter().map(|x| x.to_vec()).collect())
                .ok_or(Error::InvalidParameter {
                    name: "instance",
                    reason: format!("customer `{}` is not a vertex list", c.id()),
                })
        })
        .collect()
}

/// [`exact_opt_lists`] for an instance of vertex-list customers.
pub fn exact_opt(instance: &Instance) -> Result<ExactOptResult> {
    exact_opt_lists(instance.weights(), &vertex_lists(instance)?)
}

fn compositions(units: usize, parts: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        current.push(units);
        out.push(current.clone());
        current.pop();
        return;
    }
    for first in 0..=units {
        current.push(first);
        compositions(units - first, parts - 1, current, out);
        current.pop();
    }
}

/// Exhaustive search over convex-combination weights on the grid of the
/// given `step` (e.g. 0.02). Capped at `limit` combinations.
pub fn grid_opt(
    weights: &WeightVector,
    customers: &[Vec<Vec<f64>>],
    step: f64,
    limit: usize,
) -> Result<f64> {
    let units = (1.0 / step).round() as usize;
    let d = weights.dim();
    let mut options: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut count = 1usize;
    for c in customers {
        let mut combos = Vec::new();
        compositions(units, c.len(), &mut Vec::new(), &mut combos);
        let points: Vec<Vec<f64>> = combos
            .iter()
            .map(|w| {
                let mut x = vec![0.0; d];
                for (&u, v) in w.iter().zip(c) {
                    for (acc, value) in x.iter_mut().zip(v) {
                        *acc += u as f64 / units as f64 * value;
                    }
                }
                x
            })
            .collect();
        count = count.saturating_mul(points.len());
        options.push(points);
    }
    if count > limit {
        return Err(Error::TooLarge(format!("{count} grid combinations")));
    }
    fn walk(weights: &WeightVector, options: &[Vec<Vec<f64>>], acc: &mut Vec<f64>, best: &mut f64) {
        let Some((first, rest)) = options.split_first() else {
            *best = best.min(weights.evaluate(acc).unwrap_or(f64::INFINITY));
            return;
        };
        for p in first {
            acc.iter_mut().zip(p).for_each(|(a, v)| *a += v);
            walk(weights, rest, acc, best);
            acc.iter_mut().zip(p).for_each(|(a, v)| *a -= v);
        }
    }
    let mut best = f64::INFINITY;
    walk(weights, &options, &mut vec![0.0; d], &mut best);
    Ok(best)
}

/// `max ⟨x, y⟩ / ‖x‖_β` over the grid `{0, 1/steps, …, 1}^d \ {0}`, a lower
/// bound on the dual norm that is exact when the maximizer is an indicator.
pub fn grid_dual_norm(weights: &WeightVector, y: &[f64], steps: usize) -> Result<f64> {
    let d = weights.dim();
    crate::error::check_dim(d, y.len())?;
    let count = (steps + 1)
        .checked_pow(d as u32)
        .filter(|&c| c <= 10_000_000);
    let Some(count) = count else {
        return Err(Error::TooLarge(format!(
            "grid of {} points per axis in dimension {d}",
            steps + 1
        )));
    };
    let mut best = 0.0f64;
    let mut x = vec![0.0; d];
    for code in 1..count {
        let mut rest = code;
        for xi in x.iter_mut() {
            *xi = (rest % (steps + 1)) as f64 / steps as f64;
            rest /= steps + 1;
        }
        let norm = weights.evaluate(&x)?;
        if norm > 0.0 {
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            best = best.max(dot / norm);
        }
    }
    Ok(best)
}

/// `max_{y ∈ Y} ⟨x, y⟩ − (1/η) Σ y_i ln y_i` by grid search, for `d = 2`
/// (where `Y` is a segment) or uniform β (where `Y` is a point).
pub fn grid_conjugate(weights: &WeightVector, x: &[f64], eta: f64, steps: usize) -> Result<f64> {
    let d = weights.dim();
    crate::error::check_dim(d, x.len())?;
    let objective = |y: &[f64]| {
        let dot: f64 = y.iter().zip(x).map(|(a, b)| a * b).sum();
        let entropy: f64 = y.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum();
        dot - entropy / eta
    };
    let beta = weights.beta();
    if beta.iter().all(|&b| b == beta[0]) {
        return Ok(objective(&vec![1.0 / d as f64; d]));
    }
    if d != 2 {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: "grid conjugate needs d = 2 or uniform weights".into(),
        });
    }
    let (lo, hi) = (beta[1], beta[0]);
    Ok((0..=steps)
        .map(|s| {
            let y0 = lo + (hi - lo) * s as f64 / steps as f64;
            objective(&[y0, 1.0 - y0])
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Shape of the random weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaKind {
    /// Uniform Dirichlet sample, sorted.
    Dirichlet,
    /// Top-k with uniformly random k.
    TopK,
    /// Either of the above with probability 1/2.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOptions {
    /// Probability that a vertex entry is nonzero.
    pub density: f64,
    pub beta: BetaKind,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            density: 1.0,
            beta: BetaKind::Mixed,
        }
    }
}

/// A normalized non-increasing weight vector of dimension `d`.
pub fn random_beta(d: usize, kind: BetaKind, rng: &mut impl Rng) -> Vec<f64> {
    let kind = match kind {
        BetaKind::Mixed if rng.gen_bool(0.5) => BetaKind::TopK,
        BetaKind::Mixed => BetaKind::Dirichlet,
        k => k,
    };
    match kind {
        BetaKind::TopK => {
            let k = rng.gen_range(1..=d);
            (0..d)
                .map(|i| if i < k { 1.0 / k as f64 } else { 0.0 })
                .collect()
        }
        _ => {
            let mut beta: Vec<f64> = (0..d).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let total: f64 = beta.iter().sum();
            beta.iter_mut().for_each(|b| *b /= total);
            beta.sort_by(|a, b| b.total_cmp(a));
            beta
        }
    }
}

/// Seeded vertex-list instance: `n` customers with `1..=m_max` vertices in
/// `[0, 1]^d`, none of them the origin.
pub fn random_instance(n: usize, d: usize, m_max: usize, seed: u64) -> InstanceFile {
    random_instance_with(n, d, m_max, seed, &GenOptions::default())
}

pub fn random_instance_with(
    n: usize,
    d: usize,
    m_max: usize,
    seed: u64,
    options: &GenOptions,
) -> InstanceFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = random_beta(d, options.beta, &mut rng);
    let customers = (0..n)
        .map(|c| {
            let m = rng.gen_range(1..=m_max.max(1));
            let vertices = (0..m)
                .map(|_| {
                    let mut v: Vec<f64> = (0..d)
                        .map(|_| {
                            if rng.gen_bool(options.density.clamp(0.0, 1.0)) {
                                rng.gen()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    if v.iter().all(|&x| x == 0.0) {
                        let i = rng.gen_range(0..d);
                        v[i] = rng.gen_range(0.1..1.0);
                    }
                    v
                })
                .collect();
            CustomerSpec::Vertices {
                id: format!("c{c}"),
                vertices,
            }
        })
        .collect();
    InstanceFile {
        beta,
        customers,
        network: None,
        name: Some(format!("random-n{n}-d{d}-m{m_max}-seed{seed}")),
        comment: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(beta: &[f64]) -> WeightVector {
        WeightVector::new(beta.to_vec()).unwrap()
    }

    #[test]
    fn finite_differences() {
        let a = [0.5, -2.0, 3.0];
        let g = finite_diff_grad(
            |x| x.iter().zip(&a).map(|(p, q)| p * q).sum(),
            &[1.0, 1.0, 1.0],
            1e-4,
        );
        assert!(g.iter().zip(&a).all(|(p, q)| (p - q).abs() < 1e-10));
        let g = finite_diff_grad(|_| 7.0, &[1.0, 2.0], 1e-5);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn exact_opt_examples() {
        let r = exact_opt_lists(&w(&[0.5, 0.3, 0.2]), &[vec![vec![1.0, 2.0, 3.0]]]).unwrap();
        assert!((r.opt_value - 2.3).abs() < 1e-9);
        let two = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2];
        let r = exact_opt_lists(&w(&[1.0, 0.0]), &two).unwrap();
        assert_eq!(r.status, OptStatus::Optimal);
        assert!((r.opt_value - 1.0).abs() < 1e-9);
        let x = r.point(&two);
        assert!((w(&[1.0, 0.0]).evaluate(&x).unwrap() - r.opt_value).abs() < 1e-7);
        let r = exact_opt_lists(&w(&[0.5, 0.5]), &two[..1]).unwrap();
        assert!((r.opt_value - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exact_opt_agrees_with_grid() {
        for seed in 0..15 {
            let file = random_instance(2, 2, 3, seed);
            let inst = file.build().unwrap();
            let lists = file.vertex_lists().unwrap();
            let r = exact_opt(&inst).unwrap();
            let grid = grid_opt(inst.weights(), &lists, 0.02, 10_000_000).unwrap();
            assert!(
                r.opt_value <= grid + 1e-9,
                "seed {seed}: {} > {grid}",
                r.opt_value
            );
            assert!(
                grid - r.opt_value <= 0.03,
                "seed {seed}: {} vs {grid}",
                r.opt_value
            );
            let x = r.point(&lists);
            assert!((inst.weights().evaluate(&x).unwrap() - r.opt_value).abs() < 1e-7);
        }
    }

    #[test]
    fn grid_dual_norm_examples() {
        assert!((grid_dual_norm(&w(&[1.0, 0.0]), &[0.5, 0.5], 10).unwrap() - 1.0).abs() < 1e-12);
        assert!((grid_dual_norm(&w(&[0.7, 0.3]), &[0.5, 0.5], 20).unwrap() - 1.0).abs() < 1e-12);
        assert!((grid_dual_norm(&w(&[0.7, 0.3]), &[0.7, 0.3], 20).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generator_contract() {
        let file = random_instance(1, 1, 1, 3);
        assert_eq!(file.customers.len(), 1);
        assert_eq!(
            file.vertex_lists().unwrap()[0],
            vec![file.vertex_lists().unwrap()[0][0].clone()]
        );
        let a = serde_json::to_string(&random_instance(3, 4, 5, 7)).unwrap();
        let b = serde_json::to_string(&random_instance(3, 4, 5, 7)).unwrap();
        assert_eq!(a, b);
        let file = random_instance_with(
            3,
            4,
            5,
            7,
            &GenOptions {
                density: 0.2,
                beta: BetaKind::TopK,
            },
        );
        let lists = file.vertex_lists().unwrap();
        assert_eq!(lists.len(), 3);
        for c in &lists {
            assert!(!c.is_empty() && c.len() <= 5);
            assert!(c.iter().all(|v| v.len() == 4 && v.iter().any(|&x| x > 0.0)));
        }
        assert!(!file
            .build()
            .unwrap()
            .customers()
            .iter()
            .any(|c| c.is_trivial()));
    }
}
