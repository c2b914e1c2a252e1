//! The cost `min(x_1, …, x_m)` with `m` marginals.
//!
//! With `s = sup{x : Σ F_i(x) ≤ 1}` an optimal plan puts, in block `i`, the
//! part of `μ_i` below `s` against slices of every other marginal above `s`.

use serde::Serialize;

use crate::cost::{MultiAffinePiece, Relation, SupportRegion};
use crate::error::{Error, Result};
use crate::measure::Measure1D;
use crate::plan::{LinearForm, TransportPlan};

/// Boundary slack of [`verify_support_conditions`].
pub const SUPPORT_TOL: f64 = 1e-9;
const BISECTION_STEPS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub enum MultiCost {
    MinCoordinates,
    /// General affine family; only used for validation and geometry.
    Affine(Vec<MultiAffinePiece>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiMarginalProblem {
    marginals: Vec<Measure1D>,
    cost: MultiCost,
}

impl MultiMarginalProblem {
    pub fn new(marginals: Vec<Measure1D>, cost: MultiCost) -> Result<Self> {
        if marginals.len() < 2 {
            return Err(Error::TooFewMarginals(marginals.len()));
        }
        if let MultiCost::Affine(pieces) = &cost {
            if let Some(p) = pieces.iter().find(|p| p.coeffs.len() != marginals.len()) {
                return Err(Error::DimensionMismatch { expected: marginals.len(), got: p.coeffs.len() });
            }
        }
        Ok(MultiMarginalProblem { marginals, cost })
    }

    pub fn min_coordinates(marginals: Vec<Measure1D>) -> Result<Self> {
        Self::new(marginals, MultiCost::MinCoordinates)
    }

    pub fn marginals(&self) -> &[Measure1D] {
        &self.marginals
    }

    pub fn cost(&self) -> &MultiCost {
        &self.cost
    }

    pub fn dimension(&self) -> usize {
        self.marginals.len()
    }

    /// The cost as linear forms; min-coordinates gives the coordinate projections.
    pub fn linear_forms(&self) -> Vec<LinearForm> {
        let m = self.dimension();
        match &self.cost {
            MultiCost::MinCoordinates => (0..m)
                .map(|i| {
                    let p = MultiAffinePiece::coordinate(m, i);
                    (p.coeffs, p.offset)
                })
                .collect(),
            MultiCost::Affine(pieces) => pieces.iter().map(|p| (p.coeffs.clone(), p.offset)).collect(),
        }
    }
}

/// `s = sup{x : Σ F_i(x) ≤ 1}`.
pub fn compute_s(problem: &MultiMarginalProblem) -> f64 {
    let g = |x: f64| problem.marginals.iter().map(|mu| mu.cdf(x)).sum::<f64>() - 1.0;
    let mut lo = problem.marginals.iter().map(|mu| mu.support().0).fold(f64::INFINITY, f64::min);
    let mut hi = problem.marginals.iter().map(|mu| mu.support().1).fold(f64::NEG_INFINITY, f64::max);
    // g(lo) = -1 and g(hi) = m - 1 > 0; keep g(lo) <= 0 < g(hi).
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone)]
pub struct MultiMarginalSolution {
    pub threshold: f64,
    /// `p_i = μ_i(-∞, s]`.
    pub low_mass: Vec<f64>,
    pub value: f64,
    pub plan: TransportPlan,
    /// `Q_t` at the diagonal anchor `(s, …, s)`.
    pub region: SupportRegion,
    pub diagnostics: MultiDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiDiagnostics {
    /// `Σ p_i - 1`.
    pub mass_residual: f64,
    /// Exact cost of the constructed plan.
    pub plan_cost: f64,
}

pub fn solve_min_coordinates(problem: &MultiMarginalProblem) -> Result<MultiMarginalSolution> {
    if problem.cost != MultiCost::MinCoordinates {
        return Err(Error::Degenerate("only the min-coordinates cost has a solver".into()));
    }
    let m = problem.dimension();
    let s = compute_s(problem);
    let p: Vec<f64> = problem.marginals.iter().map(|mu| mu.cdf(s)).collect();
    let value: f64 = problem
        .marginals
        .iter()
        .map(|mu| mu.partial_first_moment(f64::NEG_INFINITY, s))
        .sum();

    // Block i: coordinate i takes levels [0, p_i]; coordinate j != i takes the
    // next free slice of [p_j, 1].
    let mut next: Vec<f64> = p.clone();
    let mut slices = Vec::with_capacity(m);
    for i in 0..m {
        let starts: Vec<f64> = (0..m).map(|j| if j == i { 0.0 } else { next[j] }).collect();
        for (j, free) in next.iter_mut().enumerate() {
            if j != i {
                *free += p[i];
            }
        }
        slices.push((p[i], starts, vec![false; m]));
    }
    let plan = TransportPlan::new(problem.marginals.clone(), slices)?;
    let region = SupportRegion::MultiMarginal { anchor: vec![s; m], signs: vec![Relation::Ge; m] };
    let diagnostics = MultiDiagnostics {
        mass_residual: p.iter().sum::<f64>() - 1.0,
        plan_cost: plan.cost(&problem.linear_forms()),
    };
    Ok(MultiMarginalSolution { threshold: s, low_mass: p, value, plan, region, diagnostics })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SupportCondition {
    /// A coordinate below `s` with another coordinate also below `s`.
    LowForcesHigh,
    /// A coordinate above `s` with no coordinate at or below `s`.
    HighNeedsLow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportViolation {
    pub index: usize,
    pub condition: SupportCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub passed: bool,
    pub checked: usize,
    pub violations: Vec<SupportViolation>,
}

pub fn verify_support_conditions(points: &[Vec<f64>], s: f64) -> SupportReport {
    let mut violations = Vec::new();
    for (index, x) in points.iter().enumerate() {
        let others = |i: usize| x.iter().enumerate().filter(move |&(j, _)| j != i).map(|(_, &v)| v);
        let low_clash = x
            .iter()
            .enumerate()
            .any(|(i, &v)| v <= s - SUPPORT_TOL && others(i).any(|w| w < s - SUPPORT_TOL));
        let lonely_high = x
            .iter()
            .enumerate()
            .any(|(i, &v)| v >= s + SUPPORT_TOL && !others(i).any(|w| w <= s + SUPPORT_TOL));
        if low_clash {
            violations.push(SupportViolation { index, condition: SupportCondition::LowForcesHigh });
        } else if lonely_high {
            violations.push(SupportViolation { index, condition: SupportCondition::HighNeedsLow });
        }
    }
    SupportReport { passed: violations.is_empty(), checked: points.len(), violations }
}
