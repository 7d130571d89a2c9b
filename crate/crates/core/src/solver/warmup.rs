use super::curve::CurveState;
use super::{Mode, Outcome, Solution, SolveReport};
use crate::approx::NormApprox;
use crate::error::{Error, Result};
use crate::instance::Instance;

/// `⌈ln d / η²⌉`, at least 1.
pub fn warmup_horizon(d: usize, eta: f64) -> u64 {
    (((d as f64).ln() / (eta * eta)).ceil() as u64).max(1)
}

/// Single-customer procedure over `X ⊆ [0,1]^d`: `T` unit steps towards the
/// oracle answer at the current gradient, returning the average `S(T)/T`.
pub fn warmup_solve(instance: &Instance, eta: f64, horizon: Option<u64>) -> Result<SolveReport> {
    if instance.len() != 1 {
        return Err(Error::InvalidParameter {
            name: "instance",
            reason: format!(
                "the warm-up solver takes exactly one customer, got {}",
                instance.len()
            ),
        });
    }
    let d = instance.dim();
    let approx = NormApprox::new(instance.weights().clone(), eta)?;
    let horizon = horizon.unwrap_or_else(|| warmup_horizon(d, eta));
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: "must be at least 1".into(),
        });
    }
    let oracle = instance.customers()[0].oracle();
    let mut state = CurveState::new(1, d, horizon);
    let mut report = SolveReport::empty(Mode::Warmup, 0);
    for _ in 0..horizon {
        let price = approx.grad_psi(state.s())?;
        report.gradient_evals += 1;
        if price.zero_coordinates() > 0 {
            report.zero_price_evals += 1;
        }
        let answer = if oracle.requires_positive_prices() {
            oracle.min_linear(&price.floored())?
        } else {
            oracle.min_linear(price.as_slice())?
        };
        report.oracle_calls += 1;
        if answer.point.len() != d {
            return Err(Error::OracleDimension {
                expected: d,
                actual: answer.point.len(),
            });
        }
        let width = answer.point.max_entry();
        if width > 1.0 + 1e-9 {
            return Err(Error::DomainViolation { norm: width });
        }
        state.apply(0, &answer, 1.0, false);
        report.iterations += 1;
    }
    let solution = Solution::from_curve(instance, &[0], &state, 1.0)?;
    report.objective = Some(instance.weights().evaluate(&solution.aggregate)?);
    report.guarantee = None;
    report.outcome = Some(Outcome::Completed);
    report.eta = Some(eta);
    report.horizon = Some(horizon);
    report.solution = Some(solution);
    Ok(report)
}

/// `η + ((e^η − 1)/η) · opt`, the warm-up bound in terms of the optimum.
pub fn warmup_bound(eta: f64, opt: f64) -> f64 {
    eta + (eta.exp_m1() / eta) * opt
}
