use super::core::{check_run_input, step_length, PriceCache, RunParams, RunResult, DECISION_TOL};
use super::curve::{CurveState, IterationRecord, RunLog};
use super::Outcome;
use crate::approx::NormApprox;
use crate::error::{Error, Result};
use crate::instance::Instance;

/// Deterministic variant of the core run: every iteration queries all active
/// customers at the current price and advances the first one (in index
/// order) whose `ξ̃ ≥ 1`. Ends with [`Outcome::NoGoodCustomer`] when there is
/// none, which certifies `Γ < τ · OPT`.
pub fn deterministic_run(
    instance: &Instance,
    approx: &NormApprox,
    params: &RunParams,
) -> Result<RunResult> {
    check_run_input(instance, approx, params)?;
    let eta = approx.eta();
    let cap_y = 1.0 + 1.0 / (2.0 * eta);
    let mut state = CurveState::new(instance.len(), instance.dim(), params.horizon);
    let mut log = RunLog::new(params.record);
    let mut cache = PriceCache::new(instance.len());

    let outcome = 'run: loop {
        if state.active().is_empty() {
            break Outcome::Completed;
        }
        if log.iterations >= params.iteration_cap {
            break Outcome::CapExceeded;
        }
        cache.refresh(approx, &state, &mut log)?;
        log.gradient_evals += 1;

        let mut chosen = None;
        let active = state.active().to_vec();
        for c in active {
            if params
                .oracle_call_cap
                .is_some_and(|cap| log.oracle_calls >= cap)
            {
                break 'run Outcome::Aborted;
            }
            let (answer, xt) = cache.answer(instance, approx, params.gamma, &state, c)?;
            log.oracle_calls += 1;
            if !xt.is_finite() {
                return Err(Error::NonFiniteStep {
                    iteration: log.iterations + 1,
                });
            }
            if chosen.is_none() && xt >= 1.0 - DECISION_TOL {
                chosen = Some((c, answer, xt));
            }
        }
        let Some((c, answer, xt)) = chosen else {
            break Outcome::NoGoodCustomer;
        };

        let iteration = log.iterations + 1;
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
        let part = state.apply(c, &answer, xi, deactivate);
        log.finish_step(iteration, c, part, xi, deactivate);
    };
    Ok(RunResult {
        state,
        log,
        outcome,
    })
}
