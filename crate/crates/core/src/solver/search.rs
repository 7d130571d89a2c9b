use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::guaranteed::{decide_scaled, Decided, MAX_GUARANTEED_ETA};
use super::{Decision, Mode, Solution, SolveReport};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::oracle::derive_seed;

/// One decide-or-solve call made by the binary search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchStep {
    pub stage: u8,
    /// Scale index in stage 1, interval level in stage 2.
    pub level: usize,
    pub attempt: u32,
    pub gamma: f64,
    pub eta: f64,
    pub horizon: u64,
    pub omega: Option<f64>,
    pub decision: Option<Decision>,
    /// Objective on the scaled instance of this step.
    pub objective: Option<f64>,
    /// Bracket `[a, b]` after the step (stage 2 only).
    pub bracket: Option<(f64, f64)>,
    pub oracle_calls: u64,
    pub gradient_evals: u64,
}

struct Search<'a> {
    instance: &'a Instance,
    seed: u64,
    stream: u64,
    report: SolveReport,
}

impl Search<'_> {
    fn decide(&mut self, scale: f64, eta: f64, gamma: f64, capped: bool) -> Result<Decided> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, self.stream));
        self.stream += 1;
        let decided = decide_scaled(self.instance, scale, eta, gamma, &mut rng, capped)?;
        if let Some(r) = &decided.result {
            self.report.oracle_calls += r.oracle_calls;
            self.report.gradient_evals += r.gradient_evals;
            self.report.iterations += r.iterations;
            self.report.zero_price_evals += r.zero_price_evals;
        }
        Ok(decided)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        stage: u8,
        level: usize,
        attempt: u32,
        gamma: f64,
        eta: f64,
        d: &Decided,
        bracket: Option<(f64, f64)>,
    ) {
        let step = SearchStep {
            stage,
            level,
            attempt,
            gamma,
            eta,
            horizon: d.horizon,
            omega: d.result.as_ref().map(|r| r.omega),
            decision: d.decision,
            objective: d.objective,
            bracket,
            oracle_calls: d.result.as_ref().map_or(0, |r| r.oracle_calls),
            gradient_evals: d.result.as_ref().map_or(0, |r| r.gradient_evals),
        };
        log::info!(
            "stage {stage} level {level} attempt {attempt}: gamma={gamma} eta={eta} T={} -> {:?}",
            d.horizon,
            d.decision
        );
        self.report.bounds.push(step);
    }
}

/// Number of stage-2 levels until the bracket width drops to `ε τ`.
fn stage_two_levels(width: f64, epsilon: f64, tau: f64) -> u32 {
    if width <= epsilon * tau {
        0
    } else {
        ((width / (epsilon * tau)).ln() / 1.5f64.ln()).ceil() as u32
    }
}

/// Parameters of [`search_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub epsilon: f64,
    pub seed: u64,
    pub tau: f64,
    /// Stop stage 2 once the best objective is within `1 + ε` of the
    /// certified lower end `a` of the bracket.
    pub early_exit: bool,
}

/// [`search_with`] with the certified early exit enabled.
pub fn binary_search_solve(
    instance: &Instance,
    epsilon: f64,
    seed: u64,
    tau: f64,
) -> Result<SolveReport> {
    search_with(
        instance,
        &SearchOptions {
            epsilon,
            seed,
            tau,
            early_exit: true,
        },
    )
}

/// `(1 + ε) τ`-approximate minimization for oracles of relative error `τ`.
///
/// A preparation call at uniform prices brackets OPT within a factor `τ d`.
/// Stage 1 searches over the scales `2^i / ‖v‖` for the largest index the
/// guaranteed run solves with `Γ = 2τ, η = 1/5`, which normalizes OPT into
/// `[1, 4τ]`. Stage 2 shrinks that bracket by a factor `2/3` per level with
/// `Γ_j = (2a + b)/3`, retrying inconclusive attempts. Every `opt_gt_gamma`
/// is certified, so `a < τ · OPT` holds on the scaled instance throughout.
pub fn search_with(instance: &Instance, options: &SearchOptions) -> Result<SolveReport> {
    let SearchOptions {
        epsilon,
        seed,
        tau,
        early_exit,
    } = *options;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must lie in (0, 1], got {epsilon}"),
        });
    }
    let epsilon = epsilon.min(1.0);
    if !(tau.is_finite() && tau >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be at least 1, got {tau}"),
        });
    }
    let mut search = Search {
        instance,
        seed,
        stream: 0,
        report: SolveReport::empty(Mode::Auto, seed),
    };
    // the uniform-price answers were obtained when the customers were built
    search.report.oracle_calls += instance.len() as u64;
    let weights = instance.weights();
    let v = instance.uniform_price_aggregate()?;
    let norm_v = weights.evaluate(&v)?;
    let d = instance.dim();
    if norm_v == 0.0 || d == 1 {
        // all customers trivial, or the norm is linear and v is optimal
        let solution = Solution::uniform(instance)?;
        search.report.objective = Some(norm_v);
        search.report.guarantee = Some(norm_v);
        search.report.lower_bound = Some(norm_v);
        search.report.solution = Some(solution);
        return Ok(search.report);
    }

    // stage 1
    let top = ((tau * d as f64).log2().ceil() as usize).max(1);
    let stage_one_scale = |i: usize| 2f64.powi(i as i32) / norm_v;
    let mut solved: BTreeMap<usize, (Solution, f64)> = BTreeMap::new();
    let mut attempt_scale = |search: &mut Search, i: usize| -> Result<bool> {
        let gamma = 2.0 * tau;
        let decided = search.decide(stage_one_scale(i), MAX_GUARANTEED_ETA, gamma, false)?;
        search.push(1, i, 0, gamma, MAX_GUARANTEED_ETA, &decided, None);
        match (decided.decision, decided.solution, decided.objective) {
            (Some(Decision::Solved), Some(s), Some(obj)) => {
                solved.insert(i, (s, obj));
                Ok(true)
            }
            _ => Ok(false),
        }
    };
    let chosen = if attempt_scale(&mut search, top)? {
        top
    } else {
        let (mut lo, mut hi) = (1, top);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if attempt_scale(&mut search, mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo == 1 && !attempt_scale(&mut search, 1)? {
            return Err(Error::SearchExhausted {
                level: 1,
                detail: "the smallest scale was rejected although its optimum is at most 2".into(),
            });
        }
        lo
    };
    let scale = stage_one_scale(chosen);
    let (mut best, mut best_objective) = solved.remove(&chosen).expect("chosen scale was solved");

    // stage 2
    let (mut a, mut b) = (1.0, 4.0 * tau);
    let levels = stage_two_levels(b - a, epsilon, tau);
    let mut level = 1u32;
    let mut upper = b;
    while b - a > epsilon * tau {
        if early_exit && best_objective <= (1.0 + epsilon) * a {
            log::info!(
                "stage 2 stops at level {level}: {best_objective} is within 1 + {epsilon} of {a}"
            );
            upper = (1.0 + epsilon) * a;
            break;
        }
        let gamma = (2.0 * a + b) / 3.0;
        let eta = ((b - a) / (36.0 * tau)).min(MAX_GUARANTEED_ETA);
        let attempts = 1u32 << levels.saturating_sub(level).min(16);
        let mut concluded = None;
        for attempt in 0..attempts {
            let last = attempt + 1 == attempts;
            let decided = search.decide(scale, eta, gamma, !last)?;
            let bracket = match decided.decision {
                Some(Decision::OptGtGamma) => Some((gamma, b)),
                Some(Decision::Solved) => Some((a, (a + 2.0 * b) / 3.0)),
                None => None,
            };
            search.push(2, level as usize, attempt, gamma, eta, &decided, bracket);
            if decided.decision.is_some() {
                concluded = Some(decided);
                break;
            }
        }
        let decided = concluded.ok_or_else(|| Error::SearchExhausted {
            level: level as usize,
            detail: format!("no attempt concluded at gamma = {gamma}"),
        })?;
        match decided.decision {
            Some(Decision::OptGtGamma) => a = gamma,
            _ => {
                b = (a + 2.0 * b) / 3.0;
                if let (Some(s), Some(obj)) = (decided.solution, decided.objective) {
                    // ties keep the later solution
                    if obj <= best_objective {
                        best = s;
                        best_objective = obj;
                    }
                }
            }
        }
        search.report.eta = Some(eta);
        search.report.gamma = Some(gamma);
        search.report.horizon = Some(decided.horizon);
        level += 1;
    }

    let mut report = search.report;
    report.objective = Some(weights.evaluate(&best.aggregate)?);
    report.guarantee = Some(upper.min(b) / scale);
    report.lower_bound = Some(a / (tau * scale));
    report.decision = Decision::Solved;
    report.solution = Some(best);
    Ok(report)
}
