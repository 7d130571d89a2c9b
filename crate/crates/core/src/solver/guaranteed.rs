use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::core::{core_run, expectation_check, RunParams, RunResult};
use super::deterministic::deterministic_run;
use super::{check_positive, Decision, Mode, Outcome, Solution, SolveReport, SolverConfig};
use crate::approx::NormApprox;
use crate::error::{Error, Result};
use crate::instance::Instance;

/// Largest smoothing parameter accepted by the guaranteed run.
pub const MAX_GUARANTEED_ETA: f64 = 0.2;

/// `Ω = nT + d(e^{2η} Γ (T + ln n / η) + δ) + n/(2η) + n`.
pub fn omega(n: usize, d: usize, horizon: u64, eta: f64, gamma: f64, delta: f64) -> f64 {
    let (n, d, t) = (n as f64, d as f64, horizon as f64);
    n * t + d * ((2.0 * eta).exp() * gamma * (t + n.ln() / eta) + delta) + n / (2.0 * eta) + n
}

/// Smallest admissible `T = ⌈(4/η²) ln(nd)⌉`, at least 1.
pub fn guaranteed_horizon(n: usize, d: usize, eta: f64) -> u64 {
    let t = (4.0 / (eta * eta) * ((n * d) as f64).ln()).ceil();
    (t as u64).max(1)
}

/// Objective bound `e^{2η} Γ (1 + ln n/(ηT)) + δ/T` of a completed core run.
pub fn completion_bound(n: usize, horizon: u64, eta: f64, gamma: f64, delta: f64) -> f64 {
    let t = horizon as f64;
    (2.0 * eta).exp() * gamma * (1.0 + (n as f64).ln() / (eta * t)) + delta / t
}

/// Which part of the guaranteed run produced its conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Core,
    ExpectationCheck,
    Deterministic,
}

#[derive(Debug, Clone)]
pub struct GuaranteedResult {
    /// `None` when the oracle-call budget ran out first.
    pub decision: Option<Decision>,
    pub phase: Phase,
    pub omega: f64,
    pub oracle_calls: u64,
    pub gradient_evals: u64,
    pub iterations: u64,
    pub zero_price_evals: u64,
    /// Potentials of the core and deterministic runs that were executed.
    pub potentials: Vec<f64>,
    pub checks: u64,
    /// The completed run when the decision is [`Decision::Solved`].
    pub run: Option<RunResult>,
    /// Iterations of the deterministic backup, when it ran.
    pub deterministic_iterations: Option<u64>,
}

impl GuaranteedResult {
    fn absorb(&mut self, run: &RunResult) {
        self.oracle_calls += run.log.oracle_calls;
        self.gradient_evals += run.log.gradient_evals;
        self.iterations += run.log.iterations;
        self.zero_price_evals += run.log.zero_price_evals;
        self.potentials.push(run.log.potential());
    }
}

fn check_guaranteed_params(n: usize, d: usize, eta: f64, horizon: u64) -> Result<()> {
    if !(eta > 0.0 && eta <= MAX_GUARANTEED_ETA) {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("must lie in (0, 1/5], got {eta}"),
        });
    }
    let needed = 4.0 / (eta * eta) * ((n * d) as f64).ln();
    if (horizon as f64) < needed {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: format!("must be at least (4/η²) ln(nd) = {needed:.3}, got {horizon}"),
        });
    }
    Ok(())
}

/// Guaranteed-termination wrapper. With at least five customers the core run
/// gets `3Ω` iterations; if it does not finish, `⌈Ω/n⌉` replayed
/// expectation checks look for proof that `Γ < τ·OPT`, and the deterministic
/// variant serves as backup. `oracle_call_cap` aborts the whole procedure.
pub fn guaranteed_run(
    instance: &Instance,
    approx: &NormApprox,
    horizon: u64,
    gamma: f64,
    rng: &mut ChaCha8Rng,
    oracle_call_cap: Option<u64>,
) -> Result<GuaranteedResult> {
    check_positive("gamma", gamma)?;
    let (n, d) = (instance.len(), instance.dim());
    let eta = approx.eta();
    check_guaranteed_params(n, d, eta, horizon)?;
    let omega = omega(n, d, horizon, eta, gamma, approx.delta());
    let mut result = GuaranteedResult {
        decision: None,
        phase: Phase::Core,
        omega,
        oracle_calls: 0,
        gradient_evals: 0,
        iterations: 0,
        zero_price_evals: 0,
        potentials: Vec::new(),
        checks: 0,
        run: None,
        deterministic_iterations: None,
    };

    if n >= 5 {
        let params = RunParams {
            gamma,
            horizon,
            iteration_cap: (3.0 * omega).floor() as u64,
            oracle_call_cap,
            record: false,
        };
        let run = core_run(instance, approx, &params, rng)?;
        result.absorb(&run);
        match run.outcome {
            Outcome::Completed => {
                result.decision = Some(Decision::Solved);
                result.run = Some(run);
                return Ok(result);
            }
            Outcome::Aborted => return Ok(result),
            _ => {}
        }
        result.phase = Phase::ExpectationCheck;
        let rounds = (omega / n as f64).ceil() as u64;
        for _ in 0..rounds {
            if oracle_call_cap.is_some_and(|cap| result.oracle_calls >= cap) {
                return Ok(result);
            }
            let i = rng.gen_range(1..=run.log.iterations);
            let e = expectation_check(instance, approx, &run, i, gamma)?;
            result.oracle_calls += e.oracle_calls;
            result.checks += 1;
            if e.below_one() {
                result.decision = Some(Decision::OptGtGamma);
                return Ok(result);
            }
        }
    }

    result.phase = Phase::Deterministic;
    let params = RunParams {
        gamma,
        horizon,
        // never reached when the potential bound holds; guards against contract violations
        iteration_cap: (2.0 * omega).ceil() as u64 + 1,
        oracle_call_cap: oracle_call_cap.map(|cap| cap.saturating_sub(result.oracle_calls)),
        record: false,
    };
    let run = deterministic_run(instance, approx, &params)?;
    result.absorb(&run);
    result.deterministic_iterations = Some(run.log.iterations);
    match run.outcome {
        Outcome::Completed => {
            result.decision = Some(Decision::Solved);
            result.run = Some(run);
        }
        Outcome::NoGoodCustomer => result.decision = Some(Decision::OptGtGamma),
        Outcome::Aborted => {}
        Outcome::CapExceeded => {
            return Err(Error::NotConverged(format!(
                "deterministic run exceeded {} iterations (Ω = {omega})",
                params.iteration_cap
            )))
        }
    }
    Ok(result)
}

/// Outcome of one decide-or-solve call, with the solution in the units of
/// the instance it was given.
#[derive(Debug, Clone)]
pub(crate) struct Decided {
    pub decision: Option<Decision>,
    pub solution: Option<Solution>,
    pub objective: Option<f64>,
    pub horizon: u64,
    pub result: Option<GuaranteedResult>,
}

/// Runs the guaranteed wrapper on `scale · X / Γ` with Γ normalized to one.
/// The returned objective is measured on `scale · X`.
pub(crate) fn decide_scaled(
    instance: &Instance,
    scale: f64,
    eta: f64,
    gamma: f64,
    rng: &mut ChaCha8Rng,
    abort_after_four_omega: bool,
) -> Result<Decided> {
    check_positive("gamma", gamma)?;
    let indices = instance.nontrivial();
    if indices.is_empty() {
        let solution = Solution::uniform(instance)?;
        return Ok(Decided {
            decision: Some(Decision::Solved),
            objective: Some(0.0),
            solution: Some(solution),
            horizon: 0,
            result: None,
        });
    }
    let factor = scale / gamma;
    let base = instance.subset(&indices)?.scaled(factor)?;
    let (n, d) = (base.len(), base.dim());
    let approx = NormApprox::new(instance.weights().clone(), eta)?;
    let horizon = guaranteed_horizon(n, d, eta);
    let cap = abort_after_four_omega
        .then(|| (4.0 * omega(n, d, horizon, eta, 1.0, approx.delta())).floor() as u64);
    let result = guaranteed_run(&base, &approx, horizon, 1.0, rng, cap)?;
    let (solution, objective) = match (&result.decision, &result.run) {
        (Some(Decision::Solved), Some(run)) => {
            // points of the solver's space divided by `factor` are original;
            // report the objective on `scale · X`
            let solution = Solution::from_curve(instance, &indices, &run.state, factor)?;
            let objective = instance.weights().evaluate(&solution.aggregate)? * scale;
            (Some(solution), Some(objective))
        }
        _ => (None, None),
    };
    Ok(Decided {
        decision: result.decision,
        solution,
        objective,
        horizon,
        result: Some(result),
    })
}

/// Decides `OPT > Γ` or returns a solution with objective at most `(1 + 3η)Γ`.
pub fn decide_or_solve(
    instance: &Instance,
    eta: f64,
    gamma: f64,
    seed: u64,
) -> Result<SolveReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decided = decide_scaled(instance, 1.0, eta, gamma, &mut rng, false)?;
    let mut report = report_from_decided(Mode::Guaranteed, seed, eta, gamma, &decided)?;
    if let Some(objective) = report.objective {
        let bound = (1.0 + 3.0 * eta) * gamma;
        report.guarantee = Some(bound);
        if objective > bound * (1.0 + 1e-9) {
            return Err(Error::NotConverged(format!(
                "objective {objective} exceeds the (1+3η)Γ bound {bound}"
            )));
        }
    }
    Ok(report)
}

fn report_from_decided(
    mode: Mode,
    seed: u64,
    eta: f64,
    gamma: f64,
    decided: &Decided,
) -> Result<SolveReport> {
    let mut report = SolveReport::empty(mode, seed);
    report.decision = decided
        .decision
        .ok_or_else(|| Error::NotConverged("oracle budget exhausted".into()))?;
    report.objective = decided.objective;
    report.solution = decided.solution.clone();
    report.eta = Some(eta);
    report.gamma = Some(gamma);
    report.horizon = Some(decided.horizon);
    if let Some(r) = &decided.result {
        report.oracle_calls = r.oracle_calls;
        report.gradient_evals = r.gradient_evals;
        report.iterations = r.iterations;
        report.omega = Some(r.omega);
        report.potential = r.potentials.iter().copied().reduce(f64::max);
        report.zero_price_evals = r.zero_price_evals;
        report.outcome = Some(match (r.decision, r.phase) {
            (Some(Decision::Solved), _) => Outcome::Completed,
            (Some(Decision::OptGtGamma), Phase::Deterministic) => Outcome::NoGoodCustomer,
            (Some(Decision::OptGtGamma), _) => Outcome::CapExceeded,
            (None, _) => Outcome::Aborted,
        });
    }
    Ok(report)
}

/// Guaranteed mode without rescaling: Γ applies to the instance as given and
/// `T` defaults to the smallest admissible value.
pub(crate) fn guaranteed_report(
    instance: &Instance,
    eta: f64,
    horizon: Option<u64>,
    gamma: f64,
    seed: u64,
) -> Result<SolveReport> {
    let indices = instance.nontrivial();
    if indices.is_empty() {
        return decide_or_solve(instance, eta, gamma, seed);
    }
    let base = instance.subset(&indices)?;
    let approx = NormApprox::new(instance.weights().clone(), eta)?;
    let horizon = horizon.unwrap_or_else(|| guaranteed_horizon(base.len(), base.dim(), eta));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = guaranteed_run(&base, &approx, horizon, gamma, &mut rng, None)?;
    let (solution, objective) = match &result.run {
        Some(run) if result.decision == Some(Decision::Solved) => {
            let solution = Solution::from_curve(instance, &indices, &run.state, 1.0)?;
            let objective = instance.weights().evaluate(&solution.aggregate)?;
            (Some(solution), Some(objective))
        }
        _ => (None, None),
    };
    let decided = Decided {
        decision: result.decision,
        solution,
        objective,
        horizon,
        result: Some(result),
    };
    let mut report = report_from_decided(Mode::Guaranteed, seed, eta, gamma, &decided)?;
    if report.objective.is_some() {
        report.guarantee = Some(completion_bound(
            base.len(),
            horizon,
            eta,
            gamma,
            approx.delta(),
        ));
    }
    Ok(report)
}

/// Standalone core or deterministic run with a fixed Γ. The randomized mode
/// is capped at `max_oracle_calls`, by default `10Ω`.
pub(crate) fn fixed_run_report(
    instance: &Instance,
    config: &SolverConfig,
    gamma: f64,
) -> Result<SolveReport> {
    check_positive("gamma", gamma)?;
    let indices = instance.nontrivial();
    let mut report = SolveReport::empty(config.mode, config.seed);
    report.eta = Some(config.eta);
    report.gamma = Some(gamma);
    if indices.is_empty() {
        report.outcome = Some(Outcome::Completed);
        report.objective = Some(0.0);
        report.solution = Some(Solution::uniform(instance)?);
        return Ok(report);
    }
    let base = instance.subset(&indices)?;
    let (n, d) = (base.len(), base.dim());
    let approx = NormApprox::new(instance.weights().clone(), config.eta)?;
    let horizon = config
        .horizon
        .unwrap_or_else(|| guaranteed_horizon(n, d, config.eta.min(MAX_GUARANTEED_ETA)));
    let omega = omega(n, d, horizon, config.eta, gamma, approx.delta());
    let cap = config
        .max_oracle_calls
        .unwrap_or((10.0 * omega).ceil() as u64);
    let params = RunParams {
        gamma,
        horizon,
        iteration_cap: cap,
        oracle_call_cap: Some(cap),
        record: false,
    };
    let run = match config.mode {
        Mode::Deterministic => deterministic_run(&base, &approx, &params)?,
        _ => core_run(
            &base,
            &approx,
            &params,
            &mut ChaCha8Rng::seed_from_u64(config.seed),
        )?,
    };
    report.horizon = Some(horizon);
    report.omega = Some(omega);
    report.potential = Some(run.log.potential());
    report.oracle_calls = run.log.oracle_calls;
    report.gradient_evals = run.log.gradient_evals;
    report.iterations = run.log.iterations;
    report.zero_price_evals = run.log.zero_price_evals;
    report.outcome = Some(run.outcome);
    match run.outcome {
        Outcome::Completed => {
            let solution = Solution::from_curve(instance, &indices, &run.state, 1.0)?;
            report.objective = Some(instance.weights().evaluate(&solution.aggregate)?);
            report.guarantee = Some(completion_bound(
                n,
                horizon,
                config.eta,
                gamma,
                approx.delta(),
            ));
            report.solution = Some(solution);
        }
        Outcome::NoGoodCustomer => report.decision = Decision::OptGtGamma,
        // an unfinished randomized run decides nothing; the caller sees the outcome
        Outcome::CapExceeded | Outcome::Aborted => {}
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_arithmetic() {
        let delta = 2f64.ln() / 0.2;
        let w = omega(2, 2, 100, 0.2, 1.0, delta);
        let expected = 200.0 + 2.0 * (0.4f64.exp() * (100.0 + 2f64.ln() / 0.2) + delta) + 5.0 + 2.0;
        assert!((w - expected).abs() < 1e-9);
        assert!((w - 522.6).abs() < 0.5, "{w}");
    }

    #[test]
    fn horizon_satisfies_the_precondition() {
        for (n, d, eta) in [(1, 1, 0.2), (3, 4, 0.2), (8, 10, 0.01)] {
            let t = guaranteed_horizon(n, d, eta);
            assert!(check_guaranteed_params(n, d, eta, t).is_ok());
            if t > 1 {
                assert!(check_guaranteed_params(n, d, eta, t - 1).is_err());
            }
        }
        assert!(check_guaranteed_params(2, 2, 0.3, 1000).is_err());
    }

    #[test]
    fn decide_examples() {
        let inst = Instance::from_vertex_lists(
            vec![1.0, 0.0],
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            ],
        )
        .unwrap();
        // OPT = 1
        let r = decide_or_solve(&inst, 0.2, 1.0, 4).unwrap();
        assert_eq!(r.decision, Decision::Solved);
        assert!(r.objective.unwrap() <= 1.6 + 1e-12);
        let r = decide_or_solve(&inst, 0.2, 100.0, 4).unwrap();
        assert_eq!(r.decision, Decision::Solved);
        // ‖x‖_β ≥ ‖x‖_1 / d = 1 for every feasible x
        let r = decide_or_solve(&inst, 0.2, 0.4, 4).unwrap();
        assert_eq!(r.decision, Decision::OptGtGamma);
    }
}
