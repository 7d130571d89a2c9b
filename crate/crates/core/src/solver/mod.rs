//! Solving procedures: the single-customer warm-up, the randomized core
//! run, its deterministic variant, the guaranteed-termination wrapper and the
//! two-stage binary search.

mod core;
pub mod curve;
mod deterministic;
mod guaranteed;
mod search;
mod warmup;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::norm::LoadVector;
use crate::oracle::{derive_seed, Witness};

pub use self::core::{
    core_run, expectation_check, step_length, xi_tilde, Expectation, RunParams, RunResult,
};
pub use self::curve::{CurveState, IterationRecord, Part, RunLog};
pub use self::deterministic::deterministic_run;
pub use self::guaranteed::{
    completion_bound, decide_or_solve, guaranteed_horizon, guaranteed_run, omega, GuaranteedResult,
    Phase,
};
pub use self::search::{binary_search_solve, search_with, SearchOptions, SearchStep};
pub use self::warmup::{warmup_bound, warmup_horizon, warmup_solve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Warmup,
    Core,
    Deterministic,
    Guaranteed,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Solved,
    OptGtGamma,
}

/// How a single run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Every customer collected its full work `T`.
    Completed,
    /// The iteration cap was reached first.
    CapExceeded,
    /// Deterministic variant only: no active customer had `ξ̃ ≥ 1`.
    NoGoodCustomer,
    /// The caller's oracle-call budget ran out.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionPart {
    pub witness: Witness,
    pub point: LoadVector,
    pub coefficient: f64,
}

/// A customer's point as a convex combination of oracle answers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CustomerSolution {
    pub id: String,
    pub trivial: bool,
    pub parts: Vec<SolutionPart>,
}

impl CustomerSolution {
    pub fn point(&self) -> Vec<f64> {
        let d = self.parts.first().map_or(0, |p| p.point.len());
        let mut x = vec![0.0; d];
        for part in &self.parts {
            for (acc, v) in x.iter_mut().zip(part.point.iter()) {
                *acc += part.coefficient * v;
            }
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub aggregate: LoadVector,
    pub customers: Vec<CustomerSolution>,
}

impl Solution {
    /// Builds the solution of `instance` from a finished curve over the
    /// customers `indices` (all others must be trivial). Points collected in
    /// the solver's scaled space are divided by `scale`.
    pub(crate) fn from_curve(
        instance: &Instance,
        indices: &[usize],
        state: &CurveState,
        scale: f64,
    ) -> Result<Self> {
        let horizon = state.horizon();
        let mut customers = Self::uniform(instance)?.customers;
        for (local, &global) in indices.iter().enumerate() {
            customers[global].parts = state
                .parts(local)
                .iter()
                .map(|p| {
                    Ok(SolutionPart {
                        witness: p.witness.clone(),
                        point: LoadVector::new(p.point.iter().map(|v| v / scale).collect())?,
                        coefficient: p.weight / horizon,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        }
        let aggregate = LoadVector::new(state.s().iter().map(|v| v / horizon / scale).collect())?;
        Ok(Self {
            aggregate,
            customers,
        })
    }

    /// Every customer at its uniform-price answer.
    pub(crate) fn uniform(instance: &Instance) -> Result<Self> {
        let customers: Vec<CustomerSolution> = instance
            .customers()
            .iter()
            .map(|c| CustomerSolution {
                id: c.id().to_string(),
                trivial: c.is_trivial(),
                parts: vec![SolutionPart {
                    witness: c.uniform_answer().witness.clone(),
                    point: c.uniform_answer().point.clone(),
                    coefficient: 1.0,
                }],
            })
            .collect();
        Ok(Self {
            aggregate: instance.uniform_price_aggregate()?,
            customers,
        })
    }

    /// `Σ_c` of the customers' convex combinations.
    pub fn recombined(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.aggregate.len()];
        for c in &self.customers {
            for (acc, v) in x.iter_mut().zip(c.point()) {
                *acc += v;
            }
        }
        x
    }
}

/// Parameters shared by the solving modes; unused fields are ignored by a mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub mode: Mode,
    pub epsilon: f64,
    pub eta: f64,
    pub horizon: Option<u64>,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub max_oracle_calls: Option<u64>,
    pub tau: f64,
    /// Auto mode: stop the bracket search once the best objective is
    /// certified within `1 + ε` of the lower bound.
    pub early_exit: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Auto,
            epsilon: 0.1,
            eta: 0.2,
            horizon: None,
            gamma: None,
            seed: 0,
            max_oracle_calls: None,
            tau: 1.0,
            early_exit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub mode: Mode,
    pub decision: Decision,
    pub outcome: Option<Outcome>,
    pub objective: Option<f64>,
    /// Proven upper bound on the objective when the run completed.
    pub guarantee: Option<f64>,
    /// Certified `OPT ≥ lower_bound` (auto mode).
    pub lower_bound: Option<f64>,
    pub oracle_calls: u64,
    pub gradient_evals: u64,
    pub iterations: u64,
    pub omega: Option<f64>,
    pub potential: Option<f64>,
    pub horizon: Option<u64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub zero_price_evals: u64,
    pub bounds: Vec<SearchStep>,
    pub solution: Option<Solution>,
}

impl SolveReport {
    pub(crate) fn empty(mode: Mode, seed: u64) -> Self {
        Self {
            mode,
            decision: Decision::Solved,
            outcome: None,
            objective: None,
            guarantee: None,
            lower_bound: None,
            oracle_calls: 0,
            gradient_evals: 0,
            iterations: 0,
            omega: None,
            potential: None,
            horizon: None,
            eta: None,
            gamma: None,
            seed,
            zero_price_evals: 0,
            bounds: Vec::new(),
            solution: None,
        }
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

/// Runs the mode selected in `config`. With `tau > 1` every oracle is first
/// wrapped in a seeded `τ`-approximate test double.
pub fn solve(instance: &Instance, config: &SolverConfig) -> Result<SolveReport> {
    let wrapped;
    let instance = if config.tau > 1.0 {
        wrapped =
            instance.with_approximate_oracles(config.tau, derive_seed(config.seed, u64::MAX))?;
        &wrapped
    } else if config.tau == 1.0 {
        instance
    } else {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be at least 1, got {}", config.tau),
        });
    };
    match config.mode {
        Mode::Auto => search_with(
            instance,
            &SearchOptions {
                epsilon: config.epsilon,
                seed: config.seed,
                tau: config.tau,
                early_exit: config.early_exit,
            },
        ),
        Mode::Warmup => warmup_solve(instance, config.eta, config.horizon),
        Mode::Guaranteed => {
            let gamma = config.gamma.ok_or(Error::InvalidParameter {
                name: "gamma",
                reason: "required for guaranteed mode".into(),
            })?;
            let mut report = guaranteed::guaranteed_report(
                instance,
                config.eta,
                config.horizon,
                gamma,
                config.seed,
            )?;
            report.mode = Mode::Guaranteed;
            Ok(report)
        }
        Mode::Core | Mode::Deterministic => {
            let gamma = config.gamma.ok_or(Error::InvalidParameter {
                name: "gamma",
                reason: "required for this mode".into(),
            })?;
            guaranteed::fixed_run_report(instance, config, gamma)
        }
    }
}
