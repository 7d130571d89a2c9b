use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::curve::{CurveState, IterationRecord, RunLog};
use super::Outcome;
use crate::approx::{LogSoftmax, NormApprox, PriceVector};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::oracle::OracleAnswer;

/// Step-size parameters of one core or deterministic run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub gamma: f64,
    pub horizon: u64,
    pub iteration_cap: u64,
    pub oracle_call_cap: Option<u64>,
    /// Keep an [`IterationRecord`] for every executed iteration.
    pub record: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: CurveState,
    pub log: RunLog,
    pub outcome: Outcome,
}

/// Unnormalized step `max{0, 1 + (1/2η) ln(Γ σ_c / cost)}`, with `σ_c` given
/// by its logarithm.
pub fn xi_tilde(eta: f64, gamma: f64, log_sigma: f64, cost: f64) -> f64 {
    (1.0 + (gamma.ln() + log_sigma - cost.ln()) / (2.0 * eta)).max(0.0)
}

/// Width-normalized step `min{ξ̃, ξ̃ / ‖s‖_∞}`.
pub fn step_length(xi_tilde: f64, width: f64) -> f64 {
    if width > 1.0 {
        xi_tilde / width
    } else {
        xi_tilde
    }
}

pub(crate) fn check_run_input(
    instance: &Instance,
    approx: &NormApprox,
    params: &RunParams,
) -> Result<()> {
    if let Some(c) = instance.customers().iter().find(|c| c.is_trivial()) {
        return Err(Error::InvalidParameter {
            name: "instance",
            reason: format!(
                "customer `{}` is trivial and must be removed before solving",
                c.id()
            ),
        });
    }
    if approx.weights().dim() != instance.dim() {
        return Err(Error::DimensionMismatch {
            expected: instance.dim(),
            actual: approx.weights().dim(),
        });
    }
    super::check_positive("gamma", params.gamma)?;
    if params.horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

/// Prices at one state plus the oracle answers already obtained there.
pub(crate) struct PriceCache {
    version: u64,
    pub(crate) price: PriceVector,
    floored: Option<Vec<f64>>,
    pub(crate) softmax: LogSoftmax,
    answers: Vec<Option<(OracleAnswer, f64)>>,
}

impl PriceCache {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            version: u64::MAX,
            price: PriceVector::ones(0),
            floored: None,
            softmax: LogSoftmax::new(1.0, &[0], &[0.0]).expect("singleton"),
            answers: vec![None; n],
        }
    }

    /// Recomputes the gradient if the state moved since the last call.
    pub(crate) fn refresh(
        &mut self,
        approx: &NormApprox,
        state: &CurveState,
        log: &mut RunLog,
    ) -> Result<()> {
        if self.version == state.version() {
            return Ok(());
        }
        self.price = approx.grad_psi(state.s())?;
        if self.price.zero_coordinates() > 0 {
            log.zero_price_evals += 1;
        }
        self.floored = None;
        self.softmax = LogSoftmax::new(approx.eta(), state.active(), state.rho())?;
        self.answers.iter_mut().for_each(|a| *a = None);
        self.version = state.version();
        Ok(())
    }

    /// Answer and `ξ̃` of `customer` at the cached state, calling its oracle
    /// only once per state.
    pub(crate) fn answer(
        &mut self,
        instance: &Instance,
        approx: &NormApprox,
        gamma: f64,
        state: &CurveState,
        customer: usize,
    ) -> Result<(OracleAnswer, f64)> {
        if let Some(hit) = &self.answers[customer] {
            return Ok(hit.clone());
        }
        let c = &instance.customers()[customer];
        let oracle = c.oracle();
        let answer = if oracle.requires_positive_prices() {
            let floored = self.floored.get_or_insert_with(|| self.price.floored());
            oracle.min_linear(floored)?
        } else {
            oracle.min_linear(self.price.as_slice())?
        };
        let answer = validate_answer(instance, customer, answer)?;
        let log_sigma = self.softmax.log_sigma(state.rho()[customer]);
        let xt = xi_tilde(approx.eta(), gamma, log_sigma, answer.cost);
        self.answers[customer] = Some((answer.clone(), xt));
        Ok((answer, xt))
    }

    pub(crate) fn all_rejected(&self, active: &[usize]) -> bool {
        active
            .iter()
            .all(|&c| matches!(self.answers[c], Some((_, xt)) if xt == 0.0))
    }
}

pub(crate) fn validate_answer(
    instance: &Instance,
    customer: usize,
    answer: OracleAnswer,
) -> Result<OracleAnswer> {
    if answer.point.len() != instance.dim() {
        return Err(Error::OracleDimension {
            expected: instance.dim(),
            actual: answer.point.len(),
        });
    }
    if answer.cost.is_nan() || answer.cost <= 0.0 {
        return Err(Error::NonPositiveCost {
            customer: instance.customers()[customer].id().to_string(),
            cost: answer.cost,
        });
    }
    Ok(answer)
}

/// Inverse-CDF draw from the softmax over the active customers.
fn sample(softmax: &LogSoftmax, active: &[usize], rho: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for &c in active {
        cumulative += softmax.log_sigma(rho[c]).exp();
        if u < cumulative {
            return c;
        }
    }
    *active.last().expect("sampling from a nonempty active set")
}

/// Randomized core run: sample a customer from the softmax of remaining
/// work, query it at the current gradient, and advance the curve by the
/// width-normalized step.
pub fn core_run(
    instance: &Instance,
    approx: &NormApprox,
    params: &RunParams,
    rng: &mut ChaCha8Rng,
) -> Result<RunResult> {
    check_run_input(instance, approx, params)?;
    let eta = approx.eta();
    let cap_y = 1.0 + 1.0 / (2.0 * eta);
    let mut state = CurveState::new(instance.len(), instance.dim(), params.horizon);
    let mut log = RunLog::new(params.record);
    let mut cache = PriceCache::new(instance.len());

    let outcome = loop {
        if state.active().is_empty() {
            break Outcome::Completed;
        }
        if log.iterations >= params.iteration_cap {
            break Outcome::CapExceeded;
        }
        if params
            .oracle_call_cap
            .is_some_and(|cap| log.oracle_calls >= cap)
        {
            break Outcome::Aborted;
        }
        cache.refresh(approx, &state, &mut log)?;
        log.gradient_evals += 1;

        let u: f64 = rng.gen();
        let c = sample(&cache.softmax, state.active(), state.rho(), u);
        let (answer, xt) = cache.answer(instance, approx, params.gamma, &state, c)?;
        log.oracle_calls += 1;
        let iteration = log.iterations + 1;
        if !xt.is_finite() {
            return Err(Error::NonFiniteStep { iteration });
        }
        let mut xi = step_length(xt, answer.point.max_entry());
        let rho_c = state.rho()[c];
        let deactivate = xi >= rho_c;
        if deactivate {
            xi = rho_c;
        }
        log.add_potential(xt.min(cap_y));
        let record = IterationRecord {
            iteration,
            customer: c,
            cost: answer.cost,
            log_sigma: cache.softmax.log_sigma(rho_c),
            xi_tilde: xt,
            xi,
            deactivated: deactivate,
        };
        log.begin_step(&state, record);
        if xi > 0.0 {
            let part = state.apply(c, &answer, xi, deactivate);
            log.finish_step(iteration, c, part, xi, deactivate);
        } else if cache.all_rejected(state.active()) {
            // the state can no longer change: every remaining iteration is a rejection
            let mut remaining = params.iteration_cap - log.iterations;
            if let Some(cap) = params.oracle_call_cap {
                remaining = remaining.min(cap.saturating_sub(log.oracle_calls));
            }
            log.fast_forward(remaining, 1);
        }
    };
    Ok(RunResult {
        state,
        log,
        outcome,
    })
}

/// Slack on the `ξ̃ ≥ 1` and `E[Y] < 1` comparisons. Both are exact ties when
/// Γ equals OPT, where rounding in the prices must not flip the decision.
pub(crate) const DECISION_TOL: f64 = 1e-9;

/// Conditional expectation of `Y_i` given the first `i − 1` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub oracle_calls: u64,
}

impl Expectation {
    pub fn below_one(&self) -> bool {
        self.value < 1.0 - DECISION_TOL
    }
}

/// Replays the state in which iteration `iteration` of `run` sampled its
/// customer, queries every customer active there at the stored price, and
/// returns `Σ_c σ_c · min{1 + 1/(2η), ξ̃_c}`.
pub fn expectation_check(
    instance: &Instance,
    approx: &NormApprox,
    run: &RunResult,
    iteration: u64,
    gamma: f64,
) -> Result<Expectation> {
    let (rho, s) = run.log.state_before(&run.state, iteration)?;
    let eta = approx.eta();
    let cap_y = 1.0 + 1.0 / (2.0 * eta);
    let price = approx.grad_psi(&s)?;
    let active: Vec<usize> = (0..rho.len()).filter(|&c| rho[c] > 0.0).collect();
    let softmax = LogSoftmax::new(eta, &active, &rho)?;
    let mut floored = None;
    let mut value = 0.0;
    for &c in &active {
        let oracle = instance.customers()[c].oracle();
        let answer = if oracle.requires_positive_prices() {
            oracle.min_linear(floored.get_or_insert_with(|| price.floored()))?
        } else {
            oracle.min_linear(price.as_slice())?
        };
        let answer = validate_answer(instance, c, answer)?;
        let log_sigma = softmax.log_sigma(rho[c]);
        value += log_sigma.exp() * xi_tilde(eta, gamma, log_sigma, answer.cost).min(cap_y);
    }
    Ok(Expectation {
        value,
        oracle_calls: active.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::lse_active;
    use crate::norm::WeightVector;
    use rand::SeedableRng;

    fn params(gamma: f64, horizon: u64, cap: u64) -> RunParams {
        RunParams {
            gamma,
            horizon,
            iteration_cap: cap,
            oracle_call_cap: None,
            record: true,
        }
    }

    #[test]
    fn step_formulas() {
        let xt = xi_tilde(0.1, 1.0, 0.5f64.ln(), 0.25);
        assert!((xt - (1.0 + 5.0 * 2f64.ln())).abs() < 1e-12);
        let eta: f64 = 0.3;
        let cost = (2.0 * eta).exp() * 0.4;
        assert_eq!(xi_tilde(eta, 1.0, 0.4f64.ln(), cost * 1.01), 0.0);
        assert_eq!(step_length(3.0, 0.5), 3.0);
        assert_eq!(step_length(3.0, 2.0), 1.5);
    }

    #[test]
    fn single_customer_trace() {
        let inst = Instance::from_vertex_lists(vec![1.0, 0.0], vec![vec![vec![1.0, 0.0]]]).unwrap();
        let approx = NormApprox::new(WeightVector::linf(2).unwrap(), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let run = core_run(&inst, &approx, &params(1.0, 30, 10_000), &mut rng).unwrap();
        assert_eq!(run.outcome, Outcome::Completed);
        let x = run.state.aggregate();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1] == 0.0, "{x:?}");
        let records = run.log.records().unwrap();
        assert!(records.iter().all(|r| r.xi_tilde >= 1.0));
        assert!(records.last().unwrap().deactivated);
        assert_eq!(run.state.rho(), &[0.0]);
    }

    #[test]
    fn rejects_trivial_customers() {
        let inst = Instance::from_vertex_lists(vec![1.0], vec![vec![vec![0.0]]]).unwrap();
        let approx = NormApprox::new(WeightVector::linf(1).unwrap(), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(core_run(&inst, &approx, &params(1.0, 3, 10), &mut rng).is_err());
    }

    #[test]
    fn stalled_runs_fast_forward_to_the_cap() {
        // Γ far below OPT: every answer is rejected from the start
        let inst = Instance::from_vertex_lists(
            vec![1.0, 0.0],
            vec![vec![vec![1.0, 1.0]], vec![vec![1.0, 1.0]]],
        )
        .unwrap();
        let approx = NormApprox::new(WeightVector::linf(2).unwrap(), 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let run = core_run(&inst, &approx, &params(0.01, 50, 1_000_000), &mut rng).unwrap();
        assert_eq!(run.outcome, Outcome::CapExceeded);
        assert_eq!(run.log.iterations, 1_000_000);
        assert_eq!(run.log.oracle_calls, 1_000_000);
        assert!(run.log.fast_forwarded > 999_000);
        assert_eq!(run.log.potential(), 0.0);
        let e = expectation_check(&inst, &approx, &run, 777_777, 0.01).unwrap();
        assert!(e.below_one());
        assert_eq!(e.oracle_calls, 2);
    }

    #[test]
    fn replay_matches_logged_steps() {
        let inst = Instance::from_vertex_lists(
            vec![0.6, 0.4],
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.5, 0.5], vec![1.0, 0.2]],
                vec![vec![0.3, 0.9]],
            ],
        )
        .unwrap();
        let approx = NormApprox::new(WeightVector::new(vec![0.6, 0.4]).unwrap(), 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gamma = 1.3;
        let run = core_run(&inst, &approx, &params(gamma, 200, 100_000), &mut rng).unwrap();
        assert_eq!(run.outcome, Outcome::Completed);
        let records = run.log.records().unwrap();
        for r in records.iter().step_by(7) {
            let (rho, s) = run.log.state_before(&run.state, r.iteration).unwrap();
            let price = approx.grad_psi(&s).unwrap();
            let active: Vec<usize> = (0..3).filter(|&c| rho[c] > 0.0).collect();
            let lse = lse_active(0.2, &active, &rho).unwrap();
            let answer = inst.customers()[r.customer]
                .oracle()
                .min_linear(price.as_slice())
                .unwrap();
            let log_sigma = 0.2 * (rho[r.customer] - lse);
            let xt = xi_tilde(0.2, gamma, log_sigma, answer.cost);
            assert!((xt - r.xi_tilde).abs() <= 1e-9, "iteration {}", r.iteration);
        }
        let final_state = run
            .log
            .state_before(&run.state, run.log.iterations)
            .unwrap();
        assert!(final_state.0.iter().filter(|v| **v > 0.0).count() == 1);
    }
}
