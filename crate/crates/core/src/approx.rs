//! Smooth approximation `Ψ_η(x) = (1/η) F*(η x)` of an ordered norm, where
//! `F*` is the convex conjugate of negative entropy restricted to the dual
//! space. Its gradient is the entropy projection of `exp(η x)`.

use serde::Serialize;

use crate::error::{check_dim, check_finite, check_nonnegative, Error, Result};
use crate::norm::WeightVector;
use crate::projection::{project, LogWeights, ProjectionResult};

/// Smallest value handed to oracles that cannot accept zero prices.
pub const PRICE_FLOOR: f64 = 1e-300;

/// Gradient of `Ψ_η`: nonnegative resource prices summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceVector {
    y: Vec<f64>,
    zero_coordinates: usize,
}

impl PriceVector {
    fn new(y: Vec<f64>) -> Self {
        let zero_coordinates = y.iter().filter(|v| **v == 0.0).count();
        Self {
            y,
            zero_coordinates,
        }
    }

    /// Uniform prices `1^d`, used for trivial-customer detection.
    pub fn ones(d: usize) -> Self {
        Self::new(vec![1.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.y
    }

    /// Number of coordinates that underflowed to exactly zero.
    pub fn zero_coordinates(&self) -> usize {
        self.zero_coordinates
    }

    /// Copy with every entry raised to at least [`PRICE_FLOOR`].
    pub fn floored(&self) -> Vec<f64> {
        self.y.iter().map(|v| v.max(PRICE_FLOOR)).collect()
    }
}

/// Value and gradient of `Ψ_η` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiEvaluation {
    pub value: f64,
    pub gradient: PriceVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormApprox {
    weights: WeightVector,
    eta: f64,
    delta: f64,
}

impl NormApprox {
    pub fn new(weights: WeightVector, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be positive and finite, got {eta}"),
            });
        }
        let delta = (weights.dim() as f64).ln() / eta;
        Ok(Self {
            weights,
            eta,
            delta,
        })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Additive error `ln d / η` of the approximation.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn projection_at(&self, x: &[f64]) -> Result<ProjectionResult> {
        check_dim(self.weights.dim(), x.len())?;
        check_finite(x)?;
        check_nonnegative(x)?;
        let logs = LogWeights::new(x.iter().map(|v| self.eta * v).collect())?;
        project(&self.weights, &logs)
    }

    pub fn grad_psi(&self, x: &[f64]) -> Result<PriceVector> {
        Ok(PriceVector::new(self.projection_at(x)?.y))
    }

    pub fn psi(&self, x: &[f64]) -> Result<f64> {
        Ok(self.projection_at(x)?.conjugate_value() / self.eta)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<PsiEvaluation> {
        let r = self.projection_at(x)?;
        let value = r.conjugate_value() / self.eta;
        Ok(PsiEvaluation {
            value,
            gradient: PriceVector::new(r.y),
        })
    }
}

fn check_active(active: &[usize], rho: &[f64]) -> Result<()> {
    if active.is_empty() {
        return Err(Error::Empty("active set"));
    }
    if let Some(&c) = active.iter().find(|&&c| c >= rho.len()) {
        return Err(Error::DimensionMismatch {
            expected: rho.len(),
            actual: c + 1,
        });
    }
    check_finite(rho)
}

/// `(1/η) ln Σ_{c∈A} exp(η ρ_c)`, stabilized by the maximum.
pub fn lse_active(eta: f64, active: &[usize], rho: &[f64]) -> Result<f64> {
    check_active(active, rho)?;
    let max = active
        .iter()
        .map(|&c| rho[c])
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = active.iter().map(|&c| (eta * (rho[c] - max)).exp()).sum();
    Ok(max + sum.ln() / eta)
}

/// `ln σ_c = η(ρ_c − max) − ln Σ_a exp(η(ρ_a − max))`, which avoids
/// subtracting two numbers of the size of `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSoftmax {
    eta: f64,
    max: f64,
    log_total: f64,
}

impl LogSoftmax {
    pub fn new(eta: f64, active: &[usize], rho: &[f64]) -> Result<Self> {
        check_active(active, rho)?;
        let max = active
            .iter()
            .map(|&c| rho[c])
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = active.iter().map(|&c| (eta * (rho[c] - max)).exp()).sum();
        Ok(Self {
            eta,
            max,
            log_total: total.ln(),
        })
    }

    pub fn log_sigma(&self, rho_c: f64) -> f64 {
        self.eta * (rho_c - self.max) - self.log_total
    }
}

/// Softmax over the active customers; inactive entries are zero.
pub fn softmax_active(eta: f64, active: &[usize], rho: &[f64]) -> Result<Vec<f64>> {
    check_active(active, rho)?;
    let max = active
        .iter()
        .map(|&c| rho[c])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sigma = vec![0.0; rho.len()];
    let mut total = 0.0;
    for &c in active {
        sigma[c] = (eta * (rho[c] - max)).exp();
        total += sigma[c];
    }
    for &c in active {
        sigma[c] /= total;
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::finite_diff_grad;
    use proptest::prelude::*;

    fn approx(beta: &[f64], eta: f64) -> NormApprox {
        NormApprox::new(WeightVector::new(beta.to_vec()).unwrap(), eta).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let g = approx(&[1.0, 0.0], 1.0)
            .grad_psi(&[2f64.ln(), 0.0])
            .unwrap();
        assert!((g.as_slice()[0] - 2.0 / 3.0).abs() < 1e-12);
        let g = approx(&[0.7, 0.3], 0.5).grad_psi(&[0.0, 0.0]).unwrap();
        assert!(g.as_slice().iter().all(|v| (v - 0.5).abs() < 1e-12));
        let g = approx(&[1.0, 0.0, 0.0], 2.0).grad_psi(&[1.0; 3]).unwrap();
        assert!(g.as_slice().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
        assert_eq!(g.zero_coordinates(), 0);
    }

    #[test]
    fn psi_examples() {
        let a = approx(&[1.0, 0.0], 1.0);
        assert!((a.psi(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((a.psi(&[1.0, 0.0]).unwrap() - (1f64.exp() + 1.0).ln()).abs() < 1e-12);
        // a single-point dual space pins Ψ to the mean plus the full entropy offset
        let a = approx(&[0.25; 4], 0.7);
        let x = [0.3, 2.0, 1.1, 0.0];
        let mean = x.iter().sum::<f64>() / 4.0;
        assert!((a.psi(&x).unwrap() - (mean + 4f64.ln() / 0.7)).abs() < 1e-12);
        assert!((a.delta() - 4f64.ln() / 0.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let a = approx(&[0.6, 0.4], 1.0);
        assert!(a.grad_psi(&[f64::NAN, 0.0]).is_err());
        assert!(a.grad_psi(&[-1.0, 0.0]).is_err());
        assert!(a.psi(&[1.0]).is_err());
        assert!(NormApprox::new(WeightVector::linf(2).unwrap(), 0.0).is_err());
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_active(3.0, &[0, 1], &[5.0, 5.0]).unwrap();
        assert_eq!(s, vec![0.5, 0.5]);
        let s = softmax_active(1.0, &[0, 1], &[2.0, 1.0]).unwrap();
        let e = 1f64.exp();
        assert!((s[0] - e / (e + 1.0)).abs() < 1e-12 && (s[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
        let s = softmax_active(1.0, &[1], &[9.0, 4.0, 2.0]).unwrap();
        assert_eq!(s, vec![0.0, 1.0, 0.0]);
        assert!(softmax_active(1.0, &[], &[1.0]).is_err());
    }

    #[test]
    fn lse_examples() {
        let (n, t, eta) = (7usize, 40.0, 0.3);
        let all: Vec<usize> = (0..n).collect();
        let v = lse_active(eta, &all, &vec![t; n]).unwrap();
        assert!((v - (t + (n as f64).ln() / eta)).abs() < 1e-12);
        assert_eq!(lse_active(1.0, &[0], &[3.0]).unwrap(), 3.0);
        assert!((lse_active(2.0, &[0, 1], &[0.0, 0.0]).unwrap() - 2f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn lse_gradient_is_softmax() {
        let rho = [1.0, 0.4, 2.5, 0.0];
        let active = [0, 2, 3];
        let eta = 0.8;
        let f = |r: &[f64]| lse_active(eta, &active, r).unwrap();
        let fd = finite_diff_grad(f, &[1.0, 0.4, 2.5, 0.5], 1e-5);
        let mut rho2 = rho;
        rho2[3] = 0.5;
        let s = softmax_active(eta, &active, &rho2).unwrap();
        for (a, b) in fd.iter().zip(&s) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    fn beta_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..10)
            .prop_filter("nonzero", |b| b.iter().any(|v| *v > 1e-3))
    }

    proptest! {
        #[test]
        fn sandwich_and_dual_bound(beta in beta_strategy(), xs in prop::collection::vec(0.0f64..20.0, 10), eta in 0.05f64..3.0) {
            let a = approx(&beta, eta);
            let x = &xs[..a.weights().dim()];
            let norm = a.weights().evaluate(x).unwrap();
            let e = a.evaluate(x).unwrap();
            prop_assert!(norm <= e.value + 1e-9);
            prop_assert!(e.value <= norm + a.delta() + 1e-9);
            prop_assert!(a.weights().evaluate_dual(e.gradient.as_slice()).unwrap() <= 1.0 + 1e-9);
            prop_assert!((e.gradient.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn psi_is_the_maximum(beta in beta_strategy(), xs in prop::collection::vec(0.0f64..5.0, 10), mix in prop::collection::vec(0.0f64..1.0, 3), eta in 0.1f64..2.0) {
            // any convex combination of permuted β is feasible for the defining maximization
            let a = approx(&beta, eta);
            let d = a.weights().dim();
            let x = &xs[..d];
            let b = a.weights().beta();
            let total: f64 = mix.iter().sum::<f64>() + 1e-9;
            let mut y = vec![0.0; d];
            for (r, m) in mix.iter().enumerate() {
                for i in 0..d {
                    y[i] += m / total * b[(i + r) % d];
                }
            }
            let s: f64 = y.iter().sum();
            y.iter_mut().for_each(|v| *v /= s);
            let entropy: f64 = y.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum();
            let value: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() - entropy / eta;
            prop_assert!(value <= a.psi(x).unwrap() + 1e-9);
        }

        #[test]
        fn gradient_matches_finite_differences(beta in beta_strategy(), xs in prop::collection::vec(0.1f64..3.0, 10), eta in 0.2f64..2.0) {
            let a = approx(&beta, eta);
            let x = &xs[..a.weights().dim()];
            let g = a.grad_psi(x).unwrap();
            let fd = finite_diff_grad(|p: &[f64]| a.psi(p).unwrap(), x, 1e-5);
            for (u, v) in fd.iter().zip(g.as_slice()) {
                prop_assert!((u - v).abs() <= 1e-4 * v.abs().max(1e-3), "{u} vs {v}");
            }
        }

        #[test]
        fn convex_along_segments(beta in beta_strategy(), xs in prop::collection::vec(0.0f64..6.0, 20), eta in 0.1f64..2.0) {
            let a = approx(&beta, eta);
            let d = a.weights().dim();
            let (x, z) = (&xs[..d], &xs[10..10 + d]);
            let mid: Vec<f64> = x.iter().zip(z).map(|(p, q)| 0.5 * (p + q)).collect();
            let lhs = a.psi(&mid).unwrap();
            prop_assert!(lhs <= 0.5 * (a.psi(x).unwrap() + a.psi(z).unwrap()) + 1e-9);
        }

        #[test]
        fn scaling_identity(beta in beta_strategy(), xs in prop::collection::vec(0.0f64..6.0, 10), eta in 0.1f64..2.0, s in 0.1f64..10.0) {
            let a = approx(&beta, eta);
            let d = a.weights().dim();
            let x = &xs[..d];
            // Ψ_{sη}(x) = Ψ_η(s x) / s
            let scaled = NormApprox::new(a.weights().clone(), s * eta).unwrap();
            let sx: Vec<f64> = x.iter().map(|v| v * s).collect();
            let lhs = scaled.psi(x).unwrap();
            let rhs = a.psi(&sx).unwrap() / s;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn bounded_gradient_increase(beta in beta_strategy(), xs in prop::collection::vec(0.0f64..6.0, 20), eta in 0.1f64..2.0) {
            let a = approx(&beta, eta);
            let d = a.weights().dim();
            let x = &xs[..d];
            let step = &xs[10..10 + d];
            let moved: Vec<f64> = x.iter().zip(step).map(|(p, q)| p + q).collect();
            let width = step.iter().copied().fold(0.0, f64::max);
            let g0 = a.grad_psi(x).unwrap();
            let g1 = a.grad_psi(&moved).unwrap();
            for (u, v) in g1.as_slice().iter().zip(g0.as_slice()) {
                prop_assert!(*u <= (eta * width).exp() * v + 1e-9);
            }
        }
    }
}
