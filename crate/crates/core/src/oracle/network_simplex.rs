//! Transportation simplex on the bipartite source/target graph.
//!
//! The basis is a spanning tree with `n1 + n2 - 1` arcs. Node potentials come
//! from one traversal per iteration. The entering arc has the most negative
//! reduced cost until a run of degenerate pivots, after which Bland's rule
//! (lowest-index entering arc) takes over until the objective moves again.
//! The leaving arc is always the lowest-index blocking arc, so no basis
//! repeats.

use std::collections::VecDeque;

use super::{DiscreteProblem, OracleResult, OracleStatus, PlanEntry, MAX_OT_ATOMS, PIVOT_TOL};
use crate::error::{Error, Result};

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 32;

pub fn solve_discrete_ot(problem: &DiscreteProblem) -> Result<OracleResult> {
    if problem.marginal_count() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: problem.marginal_count() });
    }
    let (n1, n2) = (problem.atoms()[0].len(), problem.atoms()[1].len());
    if n1.max(n2) > MAX_OT_ATOMS {
        return Err(Error::SizeLimit(format!("{n1}x{n2} atoms exceeds {MAX_OT_ATOMS} per marginal")));
    }
    let costs = problem.costs();
    let cost = |i: usize, j: usize| costs[i * n2 + j];

    let (mut arcs, mut flows) = northwest_corner(problem);
    let nodes = n1 + n2;
    let limit = 50 * n1 * n2 + 1000;
    let mut iterations = 0;
    let mut status = OracleStatus::Optimal;

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut potential = vec![0.0; nodes];
    let mut parent = vec![usize::MAX; nodes];
    let mut depth = vec![0usize; nodes];
    let mut seen = vec![false; nodes];
    let mut queue = VecDeque::with_capacity(nodes);
    let mut degenerate = 0;
    loop {
        for list in adjacency.iter_mut() {
            list.clear();
        }
        for (k, &(i, j)) in arcs.iter().enumerate() {
            adjacency[i].push(k);
            adjacency[n1 + j].push(k);
        }
        // u_i + v_j = c_ij on tree arcs, rooted at source 0
        seen.fill(false);
        seen[0] = true;
        potential[0] = 0.0;
        parent[0] = usize::MAX;
        depth[0] = 0;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &k in &adjacency[node] {
                let (i, j) = arcs[k];
                let other = if node < n1 { n1 + j } else { i };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                potential[other] = cost(i, j) - potential[node];
                parent[other] = k;
                depth[other] = depth[node] + 1;
                queue.push_back(other);
            }
        }

        let reduced = |flat: usize| {
            let (i, j) = (flat / n2, flat % n2);
            cost(i, j) - potential[i] - potential[n1 + j]
        };
        let entering = if degenerate < DEGENERATE_RUN {
            let (mut best, mut arg) = (-PIVOT_TOL, None);
            for flat in 0..n1 * n2 {
                let r = reduced(flat);
                if r < best {
                    best = r;
                    arg = Some(flat);
                }
            }
            arg
        } else {
            (0..n1 * n2).find(|&flat| reduced(flat) < -PIVOT_TOL)
        };
        let Some(flat) = entering else { break };
        if iterations >= limit {
            status = OracleStatus::IterationLimit;
            break;
        }
        iterations += 1;
        let (p, q) = (flat / n2, flat % n2);

        // tree path from sink q to source p; signs alternate starting with -
        let step_up = |node: usize| {
            let (i, j) = arcs[parent[node]];
            if node < n1 { n1 + j } else { i }
        };
        let (mut a, mut b) = (n1 + q, p);
        let (mut from_q, mut from_p) = (Vec::new(), Vec::new());
        while depth[a] > depth[b] {
            from_q.push(parent[a]);
            a = step_up(a);
        }
        while depth[b] > depth[a] {
            from_p.push(parent[b]);
            b = step_up(b);
        }
        while a != b {
            from_q.push(parent[a]);
            a = step_up(a);
            from_p.push(parent[b]);
            b = step_up(b);
        }
        from_q.extend(from_p.into_iter().rev());
        let path = from_q;

        let mut leaving = usize::MAX;
        let mut theta = f64::INFINITY;
        for &k in path.iter().step_by(2) {
            let key = arc_key(arcs[k], n2);
            if flows[k] < theta || (flows[k] == theta && key < arc_key(arcs[leaving], n2)) {
                theta = flows[k];
                leaving = k;
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                flows[k] -= theta;
            } else {
                flows[k] += theta;
            }
        }
        arcs[leaving] = (p, q);
        flows[leaving] = theta;
        degenerate = if theta > 0.0 { 0 } else { degenerate + 1 };
    }

    let mut plan: Vec<PlanEntry> = arcs
        .iter()
        .zip(&flows)
        .filter(|(_, &f)| f > 0.0)
        .map(|(&(i, j), &mass)| PlanEntry { indices: vec![i, j], mass })
        .collect();
    plan.sort_by(|x, y| x.indices.cmp(&y.indices));
    Ok(OracleResult::from_plan(problem, plan, iterations, status))
}

fn arc_key((i, j): (usize, usize), n2: usize) -> usize {
    i * n2 + j
}

/// Staircase starting basis; exhausting a row and a column together adds a
/// zero arc so the basis stays a spanning tree.
fn northwest_corner(problem: &DiscreteProblem) -> (Vec<(usize, usize)>, Vec<f64>) {
    let mut supply: Vec<f64> = problem.atoms()[0].iter().map(|a| a.weight).collect();
    let mut demand: Vec<f64> = problem.atoms()[1].iter().map(|a| a.weight).collect();
    let (n1, n2) = (supply.len(), demand.len());
    let mut arcs = Vec::with_capacity(n1 + n2 - 1);
    let mut flows = Vec::with_capacity(n1 + n2 - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        if i == n1 - 1 && j == n2 - 1 {
            // absorb rounding leftovers in the last cell
            arcs.push((i, j));
            flows.push(supply[i].min(demand[j]).max(0.0));
            break;
        }
        let f = supply[i].min(demand[j]).max(0.0);
        arcs.push((i, j));
        flows.push(f);
        supply[i] -= f;
        demand[j] -= f;
        let row_done = supply[i] <= demand[j];
        if (row_done && i < n1 - 1) || j == n2 - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    (arcs, flows)
}
