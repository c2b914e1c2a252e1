use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::nelder_mead::NelderMead;
use super::{evaluate_j, functional, verify_partition, Partition, VerifyReport};
use crate::cost::MinAffineCost;
use crate::error::{Error, Result};
use crate::measure::Measure1D;
use crate::plan::TransportPlan;
use crate::working_box;

pub const MAX_ORDER: usize = 8;
const GRID_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Largest partition order searched; defaults to the number of essential pieces.
    pub max_order: Option<usize>,
    /// Random starts per `(k, σ)` in addition to the grid starts.
    pub restarts: usize,
    pub seed: u64,
    /// Relative value tolerance of the local search.
    pub tolerance: f64,
    /// Corner margin allowed by [`verify_partition`].
    pub verify_tolerance: f64,
    /// Cells lighter than this are merged into a neighbour.
    pub collapse_mass: f64,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_order: None,
            restarts: 16,
            seed: 0,
            tolerance: 1e-15,
            verify_tolerance: 1e-6,
            collapse_mass: 1e-9,
            workers: 1,
        }
    }
}

/// Best breakpoints found for one `(k, σ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubproblemResult {
    pub order: usize,
    pub perm: Vec<usize>,
    pub levels: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub restarts: usize,
    pub starts_per_subproblem: Vec<usize>,
    pub evaluations: usize,
    pub subproblems: Vec<SubproblemResult>,
    /// Subproblem indices skipped because their partition failed verification.
    pub demoted: Vec<usize>,
    /// Index of the subproblem the reported partition came from.
    pub selected: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub value: f64,
    pub partition: Partition,
    /// Piece attaining the inner minimum per cell, indexing `cost`.
    pub labels: Vec<usize>,
    pub plan: TransportPlan,
    pub verification: VerifyReport,
    /// The essential subfamily actually optimized over.
    pub cost: MinAffineCost,
    /// Original indices of the pieces in `cost`.
    pub essential: Vec<usize>,
    pub dropped: Vec<usize>,
    pub diagnostics: Diagnostics,
}

/// Minimizes the partition functional over all orders `k <= max_order` and
/// all y-orders `σ`, returning the best verified partition and its plan.
pub fn optimize(
    mu: &Measure1D,
    nu: &Measure1D,
    cost: &MinAffineCost,
    options: &SolveOptions,
) -> Result<SolveReport> {
    let bounding = working_box(mu, nu);
    let (cost, validation) = cost.validate(&bounding)?;
    let max_order = options.max_order.unwrap_or(cost.len());
    if max_order == 0 {
        return Err(Error::InvalidPartition("maximum order must be at least 1".into()));
    }
    if max_order > MAX_ORDER {
        return Err(Error::OrderTooLarge(max_order));
    }

    let tasks: Vec<(usize, Vec<usize>)> = (1..=max_order)
        .flat_map(|k| (0..k).permutations(k).map(move |p| (k, p)))
        .enumerate()
        .map(|(i, (_, p))| (i, p))
        .collect();
    let run = |(index, perm): &(usize, Vec<usize>)| {
        solve_subproblem(mu, nu, &cost, perm, options, *index as u64)
    };
    let results: Vec<SubproblemResult> = if options.workers == 1 {
        tasks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::InvalidPartition(format!("cannot start workers: {e}")))?;
        pool.install(|| tasks.par_iter().map(run).collect())
    };

    struct Candidate {
        index: usize,
        partition: Partition,
        value: f64,
        labels: Vec<usize>,
        verification: VerifyReport,
    }
    let mut candidates: Vec<Candidate> = results
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let partition = collapse(mu, nu, &r.levels, &r.perm, options.collapse_mass);
            let (value, labels) = evaluate_j(&partition, &cost, mu, nu);
            let verification = verify_partition(
                &partition,
                &labels,
                &cost,
                mu,
                nu,
                &bounding,
                options.verify_tolerance,
            );
            Candidate { index, partition, value, labels, verification }
        })
        .collect();
    candidates.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.index.cmp(&b.index)));

    let first_ok = candidates.iter().position(|c| c.verification.passed);
    let chosen = match first_ok {
        Some(pos) => {
            // Among near-ties prefer the lexicographically smallest (k, σ).
            let bar = candidates[pos].value + 1e-12 * (1.0 + candidates[pos].value.abs());
            candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| c.verification.passed && c.value <= bar)
                .min_by_key(|(_, c)| c.index)
                .map(|(i, _)| i)
                .unwrap()
        }
        None => 0,
    };
    let demoted: Vec<usize> = candidates
        .iter()
        .take_while(|c| c.value < candidates[chosen].value)
        .filter(|c| !c.verification.passed)
        .map(|c| c.index)
        .sorted()
        .collect();
    let best = candidates.swap_remove(chosen);
    let plan = best.partition.plan(mu, nu);

    let diagnostics = Diagnostics {
        restarts: options.restarts,
        starts_per_subproblem: (1..=max_order).map(|k| starts(k - 1, options.restarts, &mut rng(0, 0)).len()).collect(),
        evaluations: results.iter().map(|r| r.evaluations).sum(),
        subproblems: results,
        demoted,
        selected: best.index,
    };
    Ok(SolveReport {
        value: best.value,
        partition: best.partition,
        labels: best.labels,
        plan,
        verification: best.verification,
        cost,
        essential: validation.essential,
        dropped: validation.dropped,
        diagnostics,
    })
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Grid starts, the equal split, then `restarts` random sorted level vectors.
fn starts(dim: usize, restarts: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    if dim == 0 {
        return vec![Vec::new()];
    }
    let grid: Vec<f64> = (1..=GRID_POINTS).map(|g| g as f64 / (GRID_POINTS + 1) as f64).collect();
    let mut out: Vec<Vec<f64>> = grid.into_iter().combinations(dim).collect();
    out.push((1..=dim).map(|i| i as f64 / (dim + 1) as f64).collect());
    for _ in 0..restarts {
        let mut u: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        u.sort_by(f64::total_cmp);
        out.push(u);
    }
    out
}

fn to_bounds(z: &[f64], bounds: &mut Vec<f64>) {
    bounds.clear();
    bounds.push(0.0);
    bounds.extend(z.iter().map(|v| v.clamp(0.0, 1.0)));
    bounds[1..].sort_by(f64::total_cmp);
    bounds.push(1.0);
}

fn solve_subproblem(
    mu: &Measure1D,
    nu: &Measure1D,
    cost: &MinAffineCost,
    perm: &[usize],
    options: &SolveOptions,
    stream: u64,
) -> SubproblemResult {
    let dim = perm.len() - 1;
    let mut bounds = Vec::with_capacity(perm.len() + 1);
    let mut labels = Vec::with_capacity(perm.len());
    let mut objective = |z: &[f64]| {
        to_bounds(z, &mut bounds);
        functional(mu, nu, cost, &bounds, perm, &mut labels)
    };
    let coarse = NelderMead {
        initial_step: 0.1,
        max_evaluations: 400 * (dim + 1),
        ftol: options.tolerance,
        xtol: 1e-10,
    };
    let fine = NelderMead { initial_step: 1e-3, ..coarse };

    let mut evaluations = 0;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts(dim, options.restarts, &mut rng(options.seed, stream)) {
        let first = coarse.minimize(&mut objective, &start);
        let polished = fine.minimize(&mut objective, &first.x);
        evaluations += first.evaluations + polished.evaluations;
        let (x, v) = if polished.value <= first.value { (polished.x, polished.value) } else { (first.x, first.value) };
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v));
        }
    }
    let (x, value) = best.unwrap();
    let mut levels: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    levels.sort_by(f64::total_cmp);
    SubproblemResult { order: perm.len(), perm: perm.to_vec(), levels, value, evaluations }
}

/// Builds a valid partition from possibly touching levels, merging cells
/// lighter than `min_mass` into an x-neighbour.
fn collapse(mu: &Measure1D, nu: &Measure1D, levels: &[f64], perm: &[usize], min_mass: f64) -> Partition {
    let mut bounds = vec![0.0];
    bounds.extend_from_slice(levels);
    bounds.push(1.0);
    let mut cells: Vec<usize> = (0..perm.len()).collect();
    let mut perm = perm.to_vec();
    loop {
        let light = (0..cells.len()).find(|&i| bounds[i + 1] - bounds[i] < min_mass);
        let Some(i) = light else { break };
        if cells.len() == 1 {
            break;
        }
        // drop the boundary shared with the neighbour that absorbs the cell
        if i + 1 < cells.len() {
            bounds.remove(i + 1);
        } else {
            bounds.remove(i);
        }
        let gone = cells.remove(i);
        perm.retain(|&c| c != gone);
    }
    let relabel = |c: usize| cells.iter().position(|&k| k == c).unwrap();
    let perm: Vec<usize> = perm.into_iter().map(relabel).collect();
    let levels = bounds[1..bounds.len() - 1].to_vec();
    Partition::new(mu, nu, levels, perm).expect("collapsed partition is valid")
}
