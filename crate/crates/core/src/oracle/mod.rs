//! Exact solvers for discretized transport problems.

mod dense_simplex;
mod network_simplex;

use serde::Serialize;

use crate::cost::MinAffineCost;
use crate::error::{Error, Result};
use crate::measure::Atom;

pub use dense_simplex::solve_discrete_mmot;
pub use network_simplex::solve_discrete_ot;

pub const MAX_OT_ATOMS: usize = 2000;
pub const MAX_MMOT_MARGINALS: usize = 3;
pub const MAX_MMOT_ATOMS: usize = 15;
/// Reduced costs and ratios closer to zero than this count as zero.
pub const PIVOT_TOL: f64 = 1e-12;
const BALANCE_TOL: f64 = 1e-12;

/// Atom lists for each marginal and the cost tensor over their product,
/// stored row-major (last marginal fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    atoms: Vec<Vec<Atom>>,
    costs: Vec<f64>,
}

impl DiscreteProblem {
    pub fn new(atoms: Vec<Vec<Atom>>, costs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::TooFewMarginals(0));
        }
        for list in &atoms {
            if list.is_empty() {
                return Err(Error::InvalidMeasure("marginal without atoms".into()));
            }
            if let Some(a) = list.iter().find(|a| !(a.weight >= 0.0) || !a.position.is_finite()) {
                return Err(Error::InvalidMeasure(format!("bad atom {a:?}")));
            }
            let total: f64 = list.iter().map(|a| a.weight).sum();
            if (total - 1.0).abs() > BALANCE_TOL {
                return Err(Error::Unbalanced(total, 1.0));
            }
        }
        let cells: usize = atoms.iter().map(Vec::len).product();
        if costs.len() != cells {
            return Err(Error::DimensionMismatch { expected: cells, got: costs.len() });
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite cost entry".into()));
        }
        Ok(DiscreteProblem { atoms, costs })
    }

    pub fn from_min_affine(source: Vec<Atom>, target: Vec<Atom>, cost: &MinAffineCost) -> Result<Self> {
        let costs = source
            .iter()
            .flat_map(|x| target.iter().map(move |y| cost.value(x.position, y.position)))
            .collect();
        Self::new(vec![source, target], costs)
    }

    pub fn from_min_coordinates(atoms: Vec<Vec<Atom>>) -> Result<Self> {
        let cells: usize = atoms.iter().map(Vec::len).product();
        let shape: Vec<usize> = atoms.iter().map(Vec::len).collect();
        let costs = (0..cells)
            .map(|flat| {
                unflatten(flat, &shape)
                    .iter()
                    .zip(&atoms)
                    .map(|(&k, list)| list[k].position)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Self::new(atoms, costs)
    }

    pub fn atoms(&self) -> &[Vec<Atom>] {
        &self.atoms
    }

    pub fn marginal_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.atoms.iter().map(Vec::len).collect()
    }

    pub fn cost_at(&self, indices: &[usize]) -> f64 {
        self.costs[flatten(indices, &self.shape())]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }
}

pub(crate) fn flatten(indices: &[usize], shape: &[usize]) -> usize {
    indices.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

pub(crate) fn unflatten(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut out = vec![0; shape.len()];
    for (slot, &n) in out.iter_mut().zip(shape).rev() {
        *slot = flat % n;
        flat /= n;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleStatus {
    Optimal,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanEntry {
    pub indices: Vec<usize>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: f64,
    /// Positive entries of the optimal basic solution.
    pub plan: Vec<PlanEntry>,
    pub iterations: usize,
    pub status: OracleStatus,
}

impl OracleResult {
    fn from_plan(problem: &DiscreteProblem, plan: Vec<PlanEntry>, iterations: usize, status: OracleStatus) -> Self {
        let value = plan.iter().map(|e| e.mass * problem.cost_at(&e.indices)).sum();
        OracleResult { value, plan, iterations, status }
    }

    /// Largest deviation of the plan's marginals from the atom weights.
    pub fn marginal_error(&self, problem: &DiscreteProblem) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, list) in problem.atoms().iter().enumerate() {
            let mut sums = vec![0.0; list.len()];
            for e in &self.plan {
                sums[e.indices[k]] += e.mass;
            }
            for (s, a) in sums.iter().zip(list) {
                worst = worst.max((s - a.weight).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let shape = [3, 4, 2];
        for flat in 0..24 {
            assert_eq!(flatten(&unflatten(flat, &shape), &shape), flat);
        }
        assert_eq!(unflatten(7, &shape), vec![0, 3, 1]);
    }

    #[test]
    fn unbalanced_rejected() {
        let a = vec![Atom { position: 0.0, weight: 0.6 }];
        let b = vec![Atom { position: 0.0, weight: 1.0 }];
        assert!(matches!(DiscreteProblem::new(vec![a, b], vec![0.0]), Err(Error::Unbalanced(..))));
    }

    #[test]
    fn min_coordinates_tensor() {
        let a = vec![Atom { position: 0.1, weight: 0.5 }, Atom { position: 0.9, weight: 0.5 }];
        let p = DiscreteProblem::from_min_coordinates(vec![a.clone(), a.clone(), a]).unwrap();
        assert_eq!(p.cost_at(&[1, 1, 1]), 0.9);
        assert_eq!(p.cost_at(&[1, 0, 1]), 0.1);
    }
}
