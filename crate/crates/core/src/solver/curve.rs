//! The solution curve `S(t)`, remaining work `ρ(t)` and the per-run log.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::norm::LoadVector;
use crate::oracle::{OracleAnswer, Witness};

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub(crate) fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// One distinct oracle answer collected for a customer, with its total weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Part {
    pub witness: Witness,
    pub point: LoadVector,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct CurveState {
    horizon: f64,
    t: Kahan,
    s: Vec<f64>,
    rho: Vec<f64>,
    active: Vec<usize>,
    parts: Vec<Vec<Part>>,
    lookup: Vec<HashMap<Witness, usize>>,
    collected: Vec<Kahan>,
    version: u64,
}

impl CurveState {
    pub fn new(customers: usize, dim: usize, horizon: u64) -> Self {
        let horizon = horizon as f64;
        Self {
            horizon,
            t: Kahan::default(),
            s: vec![0.0; dim],
            rho: vec![horizon; customers],
            active: (0..customers).collect(),
            parts: vec![Vec::new(); customers],
            lookup: vec![HashMap::new(); customers],
            collected: vec![Kahan::default(); customers],
            version: 0,
        }
    }

    /// Total work `T` per customer.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn t(&self) -> f64 {
        self.t.value()
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Active customers in increasing index order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn parts(&self, customer: usize) -> &[Part] {
        &self.parts[customer]
    }

    /// Weight collected so far for `customer`; `T − ρ_c` up to rounding.
    pub fn collected(&self, customer: usize) -> f64 {
        self.collected[customer].value()
    }

    /// Changes whenever an accepted step modifies the state.
    pub(crate) fn version(&self) -> u64 {
        self.version
    }

    /// `S(t) / T`.
    pub fn aggregate(&self) -> Vec<f64> {
        self.s.iter().map(|v| v / self.horizon).collect()
    }

    /// Adds `ξ · s` for `customer`; returns the index of the part that
    /// received the weight.
    pub(crate) fn apply(
        &mut self,
        customer: usize,
        answer: &OracleAnswer,
        xi: f64,
        deactivate: bool,
    ) -> usize {
        let existing = match answer.witness {
            Witness::None => None,
            ref w => self.lookup[customer].get(w).copied(),
        };
        let parts = &mut self.parts[customer];
        let index = match existing {
            Some(i) => {
                parts[i].weight += xi;
                i
            }
            None => {
                parts.push(Part {
                    witness: answer.witness.clone(),
                    point: answer.point.clone(),
                    weight: xi,
                });
                if answer.witness != Witness::None {
                    self.lookup[customer].insert(answer.witness.clone(), parts.len() - 1);
                }
                parts.len() - 1
            }
        };
        // the stored point is what replay uses, so the run must use it too
        for (acc, v) in self.s.iter_mut().zip(parts[index].point.iter()) {
            *acc += xi * v;
        }
        if deactivate {
            self.rho[customer] = 0.0;
            self.active.retain(|&c| c != customer);
        } else {
            self.rho[customer] -= xi;
        }
        self.t.add(xi);
        self.collected[customer].add(xi);
        self.version += 1;
        index
    }
}

/// Detailed trace of one iteration, kept only when recording is requested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub customer: usize,
    pub cost: f64,
    pub log_sigma: f64,
    pub xi_tilde: f64,
    pub xi: f64,
    pub deactivated: bool,
}

#[derive(Debug, Clone, Copy)]
struct AcceptedStep {
    iteration: u64,
    customer: u32,
    part: u32,
    xi: f64,
    deactivated: bool,
}

#[derive(Debug, Clone)]
struct Checkpoint {
    rho: Vec<f64>,
    s: Vec<f64>,
}

const CHECKPOINT_EVERY: usize = 64;

/// Counters of a run plus enough history to rebuild `ρ(t_{i−1})` and
/// `S(t_{i−1})` for any iteration `i`.
///
/// Only accepted steps are stored, with a full checkpoint every
/// [`CHECKPOINT_EVERY`] of them; replay repeats the exact floating-point
/// operations of the run, so rebuilt states are bit-identical.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub iterations: u64,
    pub oracle_calls: u64,
    pub gradient_evals: u64,
    pub zero_steps: u64,
    pub longest_zero_streak: u64,
    /// Iterations that were skipped because the state could no longer change.
    pub fast_forwarded: u64,
    /// Gradient evaluations in which some price underflowed to zero.
    pub zero_price_evals: u64,
    potential: Kahan,
    streak: u64,
    records: Option<Vec<IterationRecord>>,
    steps: Vec<AcceptedStep>,
    checkpoints: Vec<Checkpoint>,
}

impl RunLog {
    pub(crate) fn new(record: bool) -> Self {
        Self {
            iterations: 0,
            oracle_calls: 0,
            gradient_evals: 0,
            zero_steps: 0,
            longest_zero_streak: 0,
            fast_forwarded: 0,
            zero_price_evals: 0,
            potential: Kahan::default(),
            streak: 0,
            records: record.then(Vec::new),
            steps: Vec::new(),
            checkpoints: Vec::new(),
        }
    }

    /// `Σ_i min{1 + 1/(2η), ξ̃_i}` over the iterations so far.
    pub fn potential(&self) -> f64 {
        self.potential.value()
    }

    pub fn records(&self) -> Option<&[IterationRecord]> {
        self.records.as_deref()
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps.len()
    }

    pub(crate) fn add_potential(&mut self, y: f64) {
        self.potential.add(y);
    }

    /// Books one iteration. `state` must still be the state before the step.
    pub(crate) fn begin_step(&mut self, state: &CurveState, record: IterationRecord) {
        self.iterations = record.iteration;
        if record.xi > 0.0 {
            if self.steps.len().is_multiple_of(CHECKPOINT_EVERY) {
                self.checkpoints.push(Checkpoint {
                    rho: state.rho.clone(),
                    s: state.s.clone(),
                });
            }
            self.streak = 0;
        } else {
            self.zero_steps += 1;
            self.streak += 1;
            self.longest_zero_streak = self.longest_zero_streak.max(self.streak);
        }
        if log::log_enabled!(log::Level::Trace) {
            if let Ok(line) = serde_json::to_string(&record) {
                log::trace!("{line}");
            }
        }
        if let Some(records) = self.records.as_mut() {
            records.push(record);
        }
    }

    pub(crate) fn finish_step(
        &mut self,
        iteration: u64,
        customer: usize,
        part: usize,
        xi: f64,
        deactivated: bool,
    ) {
        self.steps.push(AcceptedStep {
            iteration,
            customer: customer as u32,
            part: part as u32,
            xi,
            deactivated,
        });
    }

    /// Accounts for `count` further rejected iterations without running them.
    pub(crate) fn fast_forward(&mut self, count: u64, calls_per_iteration: u64) {
        self.iterations += count;
        self.oracle_calls += count * calls_per_iteration;
        self.gradient_evals += count;
        self.zero_steps += count;
        self.fast_forwarded += count;
        self.streak += count;
        self.longest_zero_streak = self.longest_zero_streak.max(self.streak);
    }

    /// `(ρ(t_{i−1}), S(t_{i−1}))` for iteration `i ≥ 1`, i.e. the state in
    /// which iteration `i` sampled its customer.
    pub fn state_before(&self, state: &CurveState, iteration: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        if iteration == 0 || iteration > self.iterations {
            return Err(Error::MissingRecord { iteration });
        }
        let applied = self.steps.partition_point(|s| s.iteration < iteration);
        // checkpoint k is taken just before step k·CHECKPOINT_EVERY is applied
        let (mut rho, mut s, start) = match self.checkpoints.len() {
            0 => (
                vec![state.horizon; state.rho.len()],
                vec![0.0; state.s.len()],
                0,
            ),
            len => {
                let k = (applied / CHECKPOINT_EVERY).min(len - 1);
                let cp = &self.checkpoints[k];
                (cp.rho.clone(), cp.s.clone(), k * CHECKPOINT_EVERY)
            }
        };
        for step in &self.steps[start..applied] {
            let c = step.customer as usize;
            let point = &state.parts[c][step.part as usize].point;
            for (acc, v) in s.iter_mut().zip(point.iter()) {
                *acc += step.xi * v;
            }
            if step.deactivated {
                rho[c] = 0.0;
            } else {
                rho[c] -= step.xi;
            }
        }
        Ok((rho, s))
    }
}
