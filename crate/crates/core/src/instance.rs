//! Problem instances: an ordered norm plus one oracle per customer.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::norm::{LoadVector, WeightVector};
use crate::oracle::{
    ApproxOracleWrapper, LinearOracle, OracleAnswer, ScaledOracle, VertexListOracle,
};

#[derive(Debug, Clone)]
pub struct Customer {
    id: String,
    oracle: Arc<dyn LinearOracle>,
    uniform_answer: OracleAnswer,
}

impl Customer {
    /// Wraps an oracle, spending one call at the uniform price to detect
    /// whether the customer is trivial.
    pub fn new(id: impl Into<String>, oracle: Arc<dyn LinearOracle>) -> Result<Self> {
        let uniform_answer = oracle.min_linear(&vec![1.0; oracle.dim()])?;
        Ok(Self {
            id: id.into(),
            oracle,
            uniform_answer,
        })
    }

    pub fn from_vertices(id: impl Into<String>, vertices: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(id, Arc::new(VertexListOracle::new(vertices)?))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn oracle(&self) -> &Arc<dyn LinearOracle> {
        &self.oracle
    }

    /// `0 ∈ X_c`: the customer contributes nothing and is skipped by the solvers.
    pub fn is_trivial(&self) -> bool {
        self.uniform_answer.cost <= 0.0
    }

    /// The answer to the uniform price `1^d`, obtained at construction.
    pub fn uniform_answer(&self) -> &OracleAnswer {
        &self.uniform_answer
    }

    fn scaled(&self, factor: f64) -> Result<Self> {
        let mut uniform_answer = self.uniform_answer.clone();
        uniform_answer
            .point
            .as_mut_slice()
            .iter_mut()
            .for_each(|v| *v *= factor);
        uniform_answer.cost *= factor;
        Ok(Self {
            id: self.id.clone(),
            oracle: Arc::new(ScaledOracle::new(self.oracle.clone(), factor)?),
            uniform_answer,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    weights: WeightVector,
    customers: Vec<Customer>,
}

impl Instance {
    pub fn new(weights: WeightVector, customers: Vec<Customer>) -> Result<Self> {
        if customers.is_empty() {
            return Err(Error::Empty("customer list"));
        }
        for c in &customers {
            if c.oracle.dim() != weights.dim() {
                return Err(Error::OracleDimension {
                    expected: weights.dim(),
                    actual: c.oracle.dim(),
                });
            }
        }
        Ok(Self { weights, customers })
    }

    /// Convenience constructor for vertex-list customers named `c0, c1, …`.
    pub fn from_vertex_lists(beta: Vec<f64>, customers: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let customers = customers
            .into_iter()
            .enumerate()
            .map(|(i, v)| Customer::from_vertices(format!("c{i}"), v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(WeightVector::new(beta)?, customers)
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn customers(&self) -> &[Customer] {
        &self.customers
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    /// Indices of customers that still need solving.
    pub fn nontrivial(&self) -> Vec<usize> {
        (0..self.customers.len())
            .filter(|&i| !self.customers[i].is_trivial())
            .collect()
    }

    /// The instance with every feasible set multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let customers = self
            .customers
            .iter()
            .map(|c| c.scaled(factor))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights: self.weights.clone(),
            customers,
        })
    }

    /// Wraps every oracle in a `τ`-approximate test double; customer `i`
    /// uses a seed derived from `seed` and `i`.
    pub fn with_approximate_oracles(&self, tau: f64, seed: u64) -> Result<Self> {
        let customers = self
            .customers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let seed = crate::oracle::derive_seed(seed, i as u64);
                Customer::new(
                    c.id.clone(),
                    Arc::new(ApproxOracleWrapper::new(c.oracle.clone(), tau, seed)?),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights: self.weights.clone(),
            customers,
        })
    }

    /// The instance restricted to the given customers, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.weights.clone(),
            indices.iter().map(|&i| self.customers[i].clone()).collect(),
        )
    }

    /// `Σ_c min_linear(c, 1^d)`: a feasible aggregate whose norm bounds OPT from above.
    pub fn uniform_price_aggregate(&self) -> Result<LoadVector> {
        let mut total = vec![0.0; self.dim()];
        for c in &self.customers {
            for (t, v) in total.iter_mut().zip(c.uniform_answer.point.iter()) {
                *t += v;
            }
        }
        LoadVector::new(total)
    }
}
