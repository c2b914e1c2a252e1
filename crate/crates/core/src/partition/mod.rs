//! Pairs of interval partitions with matching masses, the functional
//!
//! ```text
//! J(P) = Σ_i min_j ( a_j ∫_{I_i} x dμ + b_j ∫_{J_i} y dν + c_j μ(I_i) )
//! ```
//!
//! whose minimum over partitions of order at most `n` is the optimal
//! transport cost, and the checks used to certify a minimizer.

mod nelder_mead;
mod optimize;

use serde::Serialize;

use crate::cost::{MinAffineCost, Rect};
use crate::error::{Error, Result};
use crate::measure::Measure1D;
use crate::plan::TransportPlan;

pub use nelder_mead::{Minimum, NelderMead};
pub use optimize::{optimize, Diagnostics, SolveOptions, SolveReport, SubproblemResult};

/// Tolerance on cyclic-monotonicity margins.
pub const CM_TOL: f64 = 1e-9;

/// A `(μ, ν)`-partition of order `k`.
///
/// The x-intervals `I_1 < … < I_k` are cut at the μ-levels `u_1 < … < u_{k-1}`.
/// Along the y-axis the intervals appear in the order `perm[0], perm[1], …`,
/// each `J_i` carrying the same mass as `I_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    levels: Vec<f64>,
    perm: Vec<usize>,
    masses: Vec<f64>,
    x_breaks: Vec<f64>,
    y_breaks: Vec<f64>,
    /// ν-level where `J_i` starts, indexed by cell.
    y_starts: Vec<f64>,
}

impl Partition {
    /// `levels` are the interior μ-levels, `perm[p]` the cell at y-position `p`.
    pub fn new(mu: &Measure1D, nu: &Measure1D, levels: Vec<f64>, perm: Vec<usize>) -> Result<Self> {
        let k = levels.len() + 1;
        if perm.len() != k {
            return Err(Error::InvalidPartition(format!(
                "{} levels need a permutation of {k} cells, got {}",
                levels.len(),
                perm.len()
            )));
        }
        let mut seen = vec![false; k];
        for &c in &perm {
            if c >= k || seen[c] {
                return Err(Error::InvalidPartition(format!("{perm:?} is not a permutation")));
            }
            seen[c] = true;
        }
        let mut bounds = Vec::with_capacity(k + 1);
        bounds.push(0.0);
        bounds.extend(levels.iter().copied());
        bounds.push(1.0);
        if bounds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPartition(format!(
                "levels {levels:?} must increase strictly inside (0, 1)"
            )));
        }
        let masses: Vec<f64> = bounds.windows(2).map(|w| w[1] - w[0]).collect();
        let y_starts = y_starts(&masses, &perm);
        let x_breaks = levels.iter().map(|&u| mu.quantile(u)).collect();
        let y_breaks = perm[..k - 1]
            .iter()
            .map(|&c| nu.quantile(y_starts[c] + masses[c]))
            .collect();
        Ok(Partition { levels, perm, masses, x_breaks, y_breaks, y_starts })
    }

    /// The order-1 partition `{ℝ} × {ℝ}`.
    pub fn trivial(mu: &Measure1D, nu: &Measure1D) -> Self {
        Partition::new(mu, nu, Vec::new(), vec![0]).unwrap()
    }

    pub fn order(&self) -> usize {
        self.masses.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn x_breaks(&self) -> &[f64] {
        &self.x_breaks
    }

    pub fn y_breaks(&self) -> &[f64] {
        &self.y_breaks
    }

    pub fn y_start(&self, cell: usize) -> f64 {
        self.y_starts[cell]
    }

    fn x_start(&self, cell: usize) -> f64 {
        if cell == 0 {
            0.0
        } else {
            self.levels[cell - 1]
        }
    }

    /// `I_i` as `[lo, hi)`, unbounded at the ends.
    pub fn x_interval(&self, cell: usize) -> (f64, f64) {
        let lo = if cell == 0 { f64::NEG_INFINITY } else { self.x_breaks[cell - 1] };
        let hi = if cell + 1 == self.order() { f64::INFINITY } else { self.x_breaks[cell] };
        (lo, hi)
    }

    /// `J_i` as `[lo, hi)`, unbounded at the ends.
    pub fn y_interval(&self, cell: usize) -> (f64, f64) {
        let pos = self.perm.iter().position(|&c| c == cell).unwrap();
        let lo = if pos == 0 { f64::NEG_INFINITY } else { self.y_breaks[pos - 1] };
        let hi = if pos + 1 == self.order() { f64::INFINITY } else { self.y_breaks[pos] };
        (lo, hi)
    }

    /// Closure of the part of `I_i × J_i` that carries mass.
    pub fn support_rect(&self, cell: usize, mu: &Measure1D, nu: &Measure1D) -> Rect {
        let (xs, ys, m) = (self.x_start(cell), self.y_starts[cell], self.masses[cell]);
        Rect::new(
            (mu.quantile_upper(xs), mu.quantile(xs + m)),
            (nu.quantile_upper(ys), nu.quantile(ys + m)),
        )
    }

    /// Couples `μ|I_i` with `ν|J_i` monotonically in every cell.
    pub fn plan(&self, mu: &Measure1D, nu: &Measure1D) -> TransportPlan {
        let cells = (0..self.order())
            .map(|i| (self.masses[i], vec![self.x_start(i), self.y_starts[i]], vec![false; 2]))
            .collect();
        TransportPlan::new(vec![mu.clone(), nu.clone()], cells).unwrap()
    }
}

fn y_starts(masses: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut starts = vec![0.0; masses.len()];
    let mut level = 0.0;
    for &c in perm {
        starts[c] = level;
        level += masses[c];
    }
    starts
}

/// `J` for cells given by consecutive μ-levels `bounds` (from 0 to 1, may
/// repeat) and y-order `perm`. Empty cells contribute nothing and get label 0.
pub(crate) fn functional(
    mu: &Measure1D,
    nu: &Measure1D,
    cost: &MinAffineCost,
    bounds: &[f64],
    perm: &[usize],
    labels: &mut Vec<usize>,
) -> f64 {
    let k = bounds.len() - 1;
    let masses: Vec<f64> = bounds.windows(2).map(|w| w[1] - w[0]).collect();
    let starts = y_starts(&masses, perm);
    labels.clear();
    let mut total = 0.0;
    for i in 0..k {
        let m = masses[i];
        if m <= 0.0 {
            labels.push(0);
            continue;
        }
        let x_moment = mu.partial_first_moment(mu.quantile(bounds[i]), mu.quantile(bounds[i + 1]));
        let y_moment = nu.partial_first_moment(nu.quantile(starts[i]), nu.quantile(starts[i] + m));
        let (mut best, mut arg) = (f64::INFINITY, 0);
        for (j, p) in cost.pieces().iter().enumerate() {
            let v = p.a * x_moment + p.b * y_moment + p.c0 * m;
            if v < best {
                best = v;
                arg = j;
            }
        }
        labels.push(arg);
        total += best;
    }
    total
}

/// `J(P)` and the piece attaining the inner minimum in each cell (lowest index on ties).
pub fn evaluate_j(
    partition: &Partition,
    cost: &MinAffineCost,
    mu: &Measure1D,
    nu: &Measure1D,
) -> (f64, Vec<usize>) {
    let mut bounds = vec![0.0];
    bounds.extend(partition.levels.iter().copied());
    bounds.push(1.0);
    let mut labels = Vec::new();
    let value = functional(mu, nu, cost, &bounds, &partition.perm, &mut labels);
    (value, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellViolation {
    pub cell: usize,
    pub piece: usize,
    /// `l_piece - min_j l_j` at the worst corner.
    pub margin: f64,
    pub corner: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub tolerance: f64,
    /// Largest `l_{j_i} - c` over all cell corners.
    pub worst_margin: f64,
    pub violations: Vec<CellViolation>,
}

/// Checks that the labelled piece is the envelope on every cell rectangle.
/// Affine differences on a rectangle peak at a corner, so corners suffice.
pub fn verify_partition(
    partition: &Partition,
    labels: &[usize],
    cost: &MinAffineCost,
    mu: &Measure1D,
    nu: &Measure1D,
    bounding: &Rect,
    tolerance: f64,
) -> VerifyReport {
    let mut worst_margin: f64 = 0.0;
    let mut violations = Vec::new();
    for cell in 0..partition.order() {
        if partition.masses[cell] <= 0.0 {
            continue;
        }
        let r = partition.support_rect(cell, mu, nu);
        let r = Rect::new(
            (r.x.0.max(bounding.x.0), r.x.1.min(bounding.x.1)),
            (r.y.0.max(bounding.y.0), r.y.1.min(bounding.y.1)),
        );
        let piece = cost.pieces()[labels[cell]];
        let (mut margin, mut corner) = (f64::NEG_INFINITY, (0.0, 0.0));
        for (x, y) in r.corners() {
            let m = piece.eval(x, y) - cost.value(x, y);
            if m > margin {
                margin = m;
                corner = (x, y);
            }
        }
        worst_margin = worst_margin.max(margin);
        if margin > tolerance {
            violations.push(CellViolation { cell, piece: labels[cell], margin, corner });
        }
    }
    VerifyReport { passed: violations.is_empty(), tolerance, worst_margin, violations }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclicReport {
    pub passed: bool,
    pub depth: usize,
    pub cycles_checked: u64,
    /// Largest `Σ c(x_i, y_i) - Σ c(x_i, y_{i-1})`; positive means the cycle lowers cost.
    pub worst_margin: f64,
    /// Indices of the worst cycle, in cycle order.
    pub worst_cycle: Vec<usize>,
}

/// Tests every pair (and, for `depth == 3`, both cyclic orders of every
/// triple) of support points for a cost-lowering reassignment.
pub fn cyclic_monotonicity_check(
    points: &[(f64, f64)],
    cost: &MinAffineCost,
    depth: usize,
) -> Result<CyclicReport> {
    if !(depth == 2 || depth == 3) {
        return Err(Error::InvalidPartition(format!("cycle depth must be 2 or 3, got {depth}")));
    }
    let c = |i: usize, j: usize| cost.value(points[i].0, points[j].1);
    let diag: Vec<f64> = (0..points.len()).map(|i| c(i, i)).collect();
    let mut worst = (f64::NEG_INFINITY, Vec::new());
    let mut checked = 0u64;
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            let margin = diag[i] + diag[j] - c(i, j) - c(j, i);
            checked += 1;
            if margin > worst.0 {
                worst = (margin, vec![i, j]);
            }
            if depth == 3 {
                for k in j + 1..n {
                    let lhs = diag[i] + diag[j] + diag[k];
                    // x_i→y_k, x_j→y_i, x_k→y_j and the reverse cycle
                    let forward = lhs - (c(i, k) + c(j, i) + c(k, j));
                    let backward = lhs - (c(i, j) + c(j, k) + c(k, i));
                    checked += 2;
                    if forward > worst.0 {
                        worst = (forward, vec![i, j, k]);
                    }
                    if backward > worst.0 {
                        worst = (backward, vec![i, k, j]);
                    }
                }
            }
        }
    }
    let (worst_margin, worst_cycle) = if checked == 0 { (0.0, Vec::new()) } else { worst };
    Ok(CyclicReport {
        passed: worst_margin <= CM_TOL,
        depth,
        cycles_checked: checked,
        worst_margin,
        worst_cycle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_measure, MeasureSpec};
    use approx::assert_abs_diff_eq;

    fn unif(lo: f64, hi: f64) -> Measure1D {
        build_measure(&MeasureSpec::uniform(lo, hi)).unwrap()
    }

    fn min_xy() -> MinAffineCost {
        MinAffineCost::from_triples(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap()
    }

    #[test]
    fn partition_geometry() {
        let (mu, nu) = (unif(0.0, 1.0), unif(0.0, 2.0));
        let p = Partition::new(&mu, &nu, vec![0.25, 0.75], vec![2, 0, 1]).unwrap();
        assert_eq!(p.masses(), &[0.25, 0.5, 0.25]);
        assert_eq!(p.x_breaks(), &[0.25, 0.75]);
        // y order: cell 2 (mass 1/4), cell 0 (1/4), cell 1 (1/2)
        assert_eq!(p.y_breaks(), &[0.5, 1.0]);
        assert_eq!(p.y_interval(2), (f64::NEG_INFINITY, 0.5));
        assert_eq!(p.y_interval(0), (0.5, 1.0));
        assert_eq!(p.y_interval(1), (1.0, f64::INFINITY));
        assert_eq!(p.x_interval(1), (0.25, 0.75));
        for c in 0..3 {
            let (lo, hi) = p.y_interval(c);
            assert_abs_diff_eq!(nu.mass(lo, hi), p.masses()[c], epsilon = 1e-12);
        }
    }

    #[test]
    fn partition_rejects_bad_input() {
        let u = unif(0.0, 1.0);
        assert!(Partition::new(&u, &u, vec![0.5], vec![0]).is_err());
        assert!(Partition::new(&u, &u, vec![0.5], vec![1, 1]).is_err());
        assert!(Partition::new(&u, &u, vec![0.6, 0.4], vec![0, 1, 2]).is_err());
        assert!(Partition::new(&u, &u, vec![0.0], vec![0, 1]).is_err());
    }

    #[test]
    fn j_examples() {
        let u = unif(0.0, 1.0);
        let swap = Partition::new(&u, &u, vec![0.5], vec![1, 0]).unwrap();
        let (v, labels) = evaluate_j(&swap, &min_xy(), &u, &u);
        assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        assert_eq!(labels, vec![0, 1]);

        let (v, _) = evaluate_j(&Partition::trivial(&u, &u), &min_xy(), &u, &u);
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);

        let single = MinAffineCost::from_triples(&[[1.0, 1.0, 0.0]]).unwrap();
        for p in [swap, Partition::new(&u, &u, vec![0.2, 0.9], vec![1, 2, 0]).unwrap()] {
            assert_abs_diff_eq!(evaluate_j(&p, &single, &u, &u).0, 1.0, epsilon = 1e-15);
        }
    }

    /// Closed form on Lebesgue measure on [0, 1]:
    /// Σ (t_i - t_{i-1}) min_j (a_j (t_i + t_{i-1})/2 + b_j (s_i + s_{i-1})/2 + c_j).
    #[test]
    fn j_matches_lebesgue_closed_form() {
        let u = unif(0.0, 1.0);
        let cost =
            MinAffineCost::from_triples(&[[1.0, -2.0, 0.5], [-1.0, 1.0, 0.0], [2.0, 3.0, -1.0]]).unwrap();
        let cases: [(Vec<f64>, Vec<usize>); 3] =
            [(vec![0.3], vec![1, 0]), (vec![0.1, 0.45], vec![1, 2, 0]), (vec![0.2, 0.5, 0.7], vec![3, 1, 0, 2])];
        for (levels, perm) in cases {
            let p = Partition::new(&u, &u, levels.clone(), perm.clone()).unwrap();
            let mut t = vec![0.0];
            t.extend(&levels);
            t.push(1.0);
            let mut s_lo = vec![0.0; perm.len()];
            let mut acc = 0.0;
            for &c in &perm {
                s_lo[c] = acc;
                acc += t[c + 1] - t[c];
            }
            let closed: f64 = (0..perm.len())
                .map(|i| {
                    let w = t[i + 1] - t[i];
                    let (xm, ym) = ((t[i + 1] + t[i]) / 2.0, s_lo[i] + w / 2.0);
                    w * cost.pieces().iter().map(|l| l.eval(xm, ym)).fold(f64::INFINITY, f64::min)
                })
                .sum();
            assert_abs_diff_eq!(evaluate_j(&p, &cost, &u, &u).0, closed, epsilon = 1e-14);
        }
    }

    #[test]
    fn verify_examples() {
        let u = unif(0.0, 1.0);
        let p = Partition::new(&u, &u, vec![0.5], vec![1, 0]).unwrap();
        let unit = Rect::new((0.0, 1.0), (0.0, 1.0));
        let ok = verify_partition(&p, &[0, 1], &min_xy(), &u, &u, &unit, 1e-12);
        assert!(ok.passed);

        let bad = verify_partition(&p, &[1, 1], &min_xy(), &u, &u, &unit, 1e-12);
        assert!(!bad.passed);
        assert_eq!(bad.violations[0].cell, 0);
        // y - x at (0, 1)
        assert_eq!(bad.violations[0].margin, 1.0);
        assert_eq!(bad.violations[0].corner, (0.0, 1.0));

        let single = MinAffineCost::from_triples(&[[3.0, 2.0, 1.0]]).unwrap();
        assert!(verify_partition(&Partition::trivial(&u, &u), &[0], &single, &u, &u, &unit, 0.0).passed);
    }

    #[test]
    fn cyclic_examples() {
        let c = min_xy();
        let r = cyclic_monotonicity_check(&[(0.1, 0.9), (0.9, 0.1)], &c, 2).unwrap();
        assert!(r.passed);
        // 0.2 - 1.0
        assert_abs_diff_eq!(r.worst_margin, -0.8, epsilon = 1e-15);
        let r = cyclic_monotonicity_check(&[(0.1, 0.1), (0.9, 0.9)], &c, 2).unwrap();
        assert!(!r.passed);
        assert_abs_diff_eq!(r.worst_margin, 0.8, epsilon = 1e-15);
        assert_eq!(r.worst_cycle, vec![0, 1]);
        assert!(cyclic_monotonicity_check(&[(0.4, 0.4)], &c, 3).unwrap().passed);
        assert!(cyclic_monotonicity_check(&[], &c, 2).unwrap().passed);
        assert!(cyclic_monotonicity_check(&[(0.4, 0.4)], &c, 4).is_err());
    }

    #[test]
    fn cyclic_depth_three_sees_three_cycles() {
        // A three-cycle that lowers cost: points on the comonotone diagonal.
        let c = min_xy();
        let pts = [(0.1, 0.1), (0.5, 0.5), (0.9, 0.9)];
        let r = cyclic_monotonicity_check(&pts, &c, 3).unwrap();
        assert!(!r.passed);
        assert_eq!(r.cycles_checked, 3 + 2);
    }

    #[test]
    fn plan_of_swap_partition() {
        let u = unif(0.0, 1.0);
        let p = Partition::new(&u, &u, vec![0.5], vec![1, 0]).unwrap();
        let plan = p.plan(&u, &u);
        let forms = min_xy().linear_forms();
        assert_abs_diff_eq!(plan.cost(&forms), 0.25, epsilon = 1e-15);
        assert!(plan.marginal_discrepancy(64).iter().all(|d| *d <= 1e-12));
    }
}
