//! Two-phase tableau simplex for the multi-marginal linear program.

use super::{
    unflatten, DiscreteProblem, OracleResult, OracleStatus, PlanEntry, MAX_MMOT_ATOMS, MAX_MMOT_MARGINALS,
    PIVOT_TOL,
};
use crate::error::{Error, Result};

pub fn solve_discrete_mmot(problem: &DiscreteProblem) -> Result<OracleResult> {
    let m = problem.marginal_count();
    if m < 2 {
        return Err(Error::TooFewMarginals(m));
    }
    let shape = problem.shape();
    if m > MAX_MMOT_MARGINALS || shape.iter().any(|&n| n > MAX_MMOT_ATOMS) {
        return Err(Error::SizeLimit(format!(
            "{shape:?} exceeds {MAX_MMOT_MARGINALS} marginals of {MAX_MMOT_ATOMS} atoms"
        )));
    }
    let cells = problem.costs().len();
    let index: Vec<Vec<usize>> = (0..cells).map(|flat| unflatten(flat, &shape)).collect();

    // One equality per atom; the last atom of every marginal after the first
    // is implied by the others.
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for (k, &n) in shape.iter().enumerate() {
        let keep = if k == 0 { n } else { n - 1 };
        rows.extend((0..keep).map(|a| (k, a)));
    }
    let a: Vec<Vec<f64>> = rows
        .iter()
        .map(|&(k, atom)| index.iter().map(|ix| if ix[k] == atom { 1.0 } else { 0.0 }).collect())
        .collect();
    let b: Vec<f64> = rows.iter().map(|&(k, atom)| problem.atoms()[k][atom].weight).collect();

    let solution = Tableau::solve(&a, &b, problem.costs())?;
    let plan = solution
        .x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(flat, &mass)| PlanEntry { indices: index[flat].clone(), mass })
        .collect();
    Ok(OracleResult::from_plan(problem, plan, solution.iterations, solution.status))
}

struct Solution {
    x: Vec<f64>,
    iterations: usize,
    status: OracleStatus,
}

/// `min c·x` subject to `A x = b`, `x >= 0`, `b >= 0`.
struct Tableau {
    /// rows × (vars + artificials + 1); last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    iterations: usize,
    limit: usize,
}

impl Tableau {
    fn solve(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<Solution> {
        let (r, n) = (a.len(), c.len());
        let width = n + r;
        let t: Vec<Vec<f64>> = (0..r)
            .map(|i| {
                let mut row = a[i].clone();
                row.extend((0..r).map(|k| if k == i { 1.0 } else { 0.0 }));
                row.push(b[i]);
                row
            })
            .collect();
        let mut tab = Tableau { t, basis: (n..n + r).collect(), width, iterations: 0, limit: 200 * (width + r) };

        let phase_one: Vec<f64> = (0..width).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
        let status = tab.run(&phase_one, width);
        let infeasibility: f64 = (0..r).filter(|&i| tab.basis[i] >= n).map(|i| tab.rhs(i)).sum();
        if status == OracleStatus::Optimal && infeasibility > 1e-9 {
            return Err(Error::Infeasible);
        }
        // drive zero-level artificials out where a real column can replace them
        for i in 0..r {
            if tab.basis[i] >= n {
                if let Some(j) = (0..n).find(|&j| tab.t[i][j].abs() > PIVOT_TOL) {
                    tab.pivot(i, j);
                }
            }
        }
        let mut phase_two = c.to_vec();
        phase_two.extend(std::iter::repeat_n(0.0, r));
        let status = if status == OracleStatus::Optimal { tab.run(&phase_two, n) } else { status };

        let mut x = vec![0.0; n];
        for (i, &j) in tab.basis.iter().enumerate() {
            if j < n {
                x[j] = tab.rhs(i).max(0.0);
            }
        }
        Ok(Solution { x, iterations: tab.iterations, status })
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.width]
    }

    /// Bland's rule over columns `< allowed`.
    fn run(&mut self, cost: &[f64], allowed: usize) -> OracleStatus {
        loop {
            let duals: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
            let entering = (0..allowed).find(|&j| {
                let z: f64 = self.t.iter().zip(&duals).map(|(row, d)| d * row[j]).sum();
                cost[j] - z < -PIVOT_TOL
            });
            let Some(j) = entering else { return OracleStatus::Optimal };
            if self.iterations >= self.limit {
                return OracleStatus::IterationLimit;
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let coef = self.t[i][j];
                if coef > PIVOT_TOL {
                    let ratio = self.rhs(i) / coef;
                    let better = match leave {
                        None => true,
                        Some((k, best)) => {
                            ratio < best - PIVOT_TOL
                                || (ratio <= best + PIVOT_TOL && self.basis[i] < self.basis[k])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            // bounded: every column of a transportation polytope is
            let Some((i, _)) = leave else { return OracleStatus::Optimal };
            self.pivot(i, j);
            self.iterations += 1;
        }
    }

    fn pivot(&mut self, i: usize, j: usize) {
        let p = self.t[i][j];
        for v in self.t[i].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[i].clone();
        for (k, row) in self.t.iter_mut().enumerate() {
            if k == i {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[i] = j;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::MinAffineCost;
    use crate::measure::Atom;
    use crate::oracle::solve_discrete_ot;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_atoms(count: usize) -> Vec<Atom> {
        (0..count).map(|k| Atom { position: (k as f64 + 0.5) / count as f64, weight: 1.0 / count as f64 }).collect()
    }

    #[test]
    fn three_uniforms_near_one_sixth() {
        let p = DiscreteProblem::from_min_coordinates(vec![uniform_atoms(9); 3]).unwrap();
        let r = solve_discrete_mmot(&p).unwrap();
        assert_eq!(r.status, OracleStatus::Optimal);
        assert!((r.value - 1.0 / 6.0).abs() <= 0.04, "{}", r.value);
        assert!(r.marginal_error(&p) <= 1e-10);
    }

    #[test]
    fn two_marginals_agree_with_network_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let mut atoms = || -> Vec<Atom> {
                let w: Vec<f64> = (0..7).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = w.iter().sum();
                let mut out: Vec<Atom> =
                    w.iter().map(|&wi| Atom { position: rng.gen_range(-1.0..1.0), weight: wi / total }).collect();
                let head: f64 = out[..6].iter().map(|a| a.weight).sum();
                out[6].weight = 1.0 - head;
                out
            };
            let (a, b) = (atoms(), atoms());
            let cost = MinAffineCost::from_triples(&[[1.0, 2.0, 0.0], [-1.0, 0.5, 0.3], [0.0, -1.0, 0.1]]).unwrap();
            let p = DiscreteProblem::from_min_affine(a, b, &cost).unwrap();
            let dense = solve_discrete_mmot(&p).unwrap();
            let network = solve_discrete_ot(&p).unwrap();
            assert_abs_diff_eq!(dense.value, network.value, epsilon = 1e-10);
        }
    }

    #[test]
    fn identical_single_atoms() {
        let a = vec![Atom { position: 0.4, weight: 1.0 }];
        let p = DiscreteProblem::from_min_coordinates(vec![a.clone(), a.clone(), a]).unwrap();
        assert_eq!(solve_discrete_mmot(&p).unwrap().value, 0.4);
    }

    #[test]
    fn size_limits() {
        let p = DiscreteProblem::from_min_coordinates(vec![uniform_atoms(16), uniform_atoms(2)]).unwrap();
        assert!(matches!(solve_discrete_mmot(&p), Err(Error::SizeLimit(_))));
        let p = DiscreteProblem::from_min_coordinates(vec![uniform_atoms(2); 4]).unwrap();
        assert!(matches!(solve_discrete_mmot(&p), Err(Error::SizeLimit(_))));
    }
}
