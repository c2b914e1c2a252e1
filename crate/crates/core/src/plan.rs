//! Transport plans built from blocks of monotone couplings.
//!
//! A cell carries mass `m` and, for every marginal `j`, a slice
//! `[start_j, start_j + m]` of that marginal's probability levels. Inside the
//! cell the coordinates move together: at local level `w ∈ [0, m]` coordinate
//! `j` sits at `Q_j(start_j + w)`, or at `Q_j(start_j + m - w)` when the
//! coordinate is reversed. Both the plan cost and its marginals are therefore
//! available in closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::Measure1D;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanCell {
    pub mass: f64,
    pub starts: Vec<f64>,
    pub reversed: Vec<bool>,
    /// Closure of the cell's support along each axis.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoint {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// A coupling of `marginals` assembled from [`PlanCell`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    marginals: Vec<Measure1D>,
    cells: Vec<PlanCell>,
}

/// Linear form `coeffs · x + offset`.
pub type LinearForm = (Vec<f64>, f64);

impl TransportPlan {
    /// `slices[c]` is `(mass, starts, reversed)` for cell `c`; zero-mass cells are dropped.
    pub fn new(marginals: Vec<Measure1D>, slices: Vec<(f64, Vec<f64>, Vec<bool>)>) -> Result<Self> {
        let m = marginals.len();
        let mut cells = Vec::with_capacity(slices.len());
        for (mass, starts, reversed) in slices {
            if starts.len() != m || reversed.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: starts.len() });
            }
            if !(mass >= 0.0) {
                return Err(Error::InvalidPartition(format!("negative cell mass {mass}")));
            }
            if mass == 0.0 {
                continue;
            }
            let bounds = marginals
                .iter()
                .zip(&starts)
                .map(|(mu, &s)| (mu.quantile_upper(s), mu.quantile(s + mass)))
                .collect();
            cells.push(PlanCell { mass, starts, reversed, bounds });
        }
        Ok(TransportPlan { marginals, cells })
    }

    /// The quantile coupling of all marginals.
    pub fn comonotone(marginals: Vec<Measure1D>) -> Self {
        let m = marginals.len();
        TransportPlan::new(marginals, vec![(1.0, vec![0.0; m], vec![false; m])]).unwrap()
    }

    /// Couples the lowest levels of `mu` with the highest levels of `nu`.
    pub fn antitone(mu: Measure1D, nu: Measure1D) -> Self {
        TransportPlan::new(vec![mu, nu], vec![(1.0, vec![0.0, 0.0], vec![false, true])]).unwrap()
    }

    pub fn marginals(&self) -> &[Measure1D] {
        &self.marginals
    }

    pub fn cells(&self) -> &[PlanCell] {
        &self.cells
    }

    pub fn dimension(&self) -> usize {
        self.marginals.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    fn level(cell: &PlanCell, j: usize, w: f64) -> f64 {
        if cell.reversed[j] {
            cell.starts[j] + cell.mass - w
        } else {
            cell.starts[j] + w
        }
    }

    /// Support point of `cell` at local level `w ∈ [0, mass]`.
    pub fn point_at(&self, cell: usize, w: f64) -> Vec<f64> {
        let cell = &self.cells[cell];
        self.marginals
            .iter()
            .enumerate()
            .map(|(j, mu)| mu.quantile(Self::level(cell, j, w)))
            .collect()
    }

    /// `n` equally weighted points at the midpoints of `n` equal mass slots.
    pub fn sample(&self, n: usize) -> Vec<WeightedPoint> {
        let total = self.total_mass();
        let weight = total / n as f64;
        let mut out = Vec::with_capacity(n);
        let mut cell = 0;
        let mut offset = 0.0;
        for k in 0..n {
            let w = (k as f64 + 0.5) * weight;
            while cell + 1 < self.cells.len() && w >= offset + self.cells[cell].mass {
                offset += self.cells[cell].mass;
                cell += 1;
            }
            let local = (w - offset).clamp(0.0, self.cells[cell].mass);
            out.push(WeightedPoint { point: self.point_at(cell, local), weight });
        }
        out
    }

    /// `∫ min_k form_k dπ`, exact.
    pub fn cost(&self, forms: &[LinearForm]) -> f64 {
        self.cells.iter().map(|cell| self.cell_cost(cell, forms)).sum()
    }

    /// `∫_cell min_k form_k dπ`, exact.
    pub fn cell_cost(&self, cell: &PlanCell, forms: &[LinearForm]) -> f64 {
        let mut cuts = vec![0.0, cell.mass];
        for (j, mu) in self.marginals.iter().enumerate() {
            let (p0, p1) = (cell.starts[j], cell.starts[j] + cell.mass);
            for piece in mu.quantile_pieces(p0, p1) {
                for p in [piece.p0, piece.p1] {
                    let w = if cell.reversed[j] { p1 - p } else { p - p0 };
                    cuts.push(w.clamp(0.0, cell.mass));
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let m = self.marginals.len();
        let mut total = 0.0;
        let mut xa = vec![0.0; m];
        let mut xb = vec![0.0; m];
        let mut va = vec![0.0; forms.len()];
        let mut vb = vec![0.0; forms.len()];
        for w in cuts.windows(2) {
            let (wa, wb) = (w[0], w[1]);
            if wb <= wa {
                continue;
            }
            let mid = 0.5 * (wa + wb);
            for (j, mu) in self.marginals.iter().enumerate() {
                let (f0, f1, x0, x1) = mu.segment_at(Self::level(cell, j, mid));
                let at = |p: f64| x0 + (x1 - x0) * (p - f0) / (f1 - f0);
                xa[j] = at(Self::level(cell, j, wa));
                xb[j] = at(Self::level(cell, j, wb));
            }
            for (k, (coeffs, offset)) in forms.iter().enumerate() {
                va[k] = dot(coeffs, &xa) + offset;
                vb[k] = dot(coeffs, &xb) + offset;
            }
            total += (wb - wa) * mean_of_min_linear(&va, &vb);
        }
        total
    }

    /// Largest discrepancy, per axis, between the plan's pushforward and the
    /// marginal on `intervals` equal intervals spanning the support.
    pub fn marginal_discrepancy(&self, intervals: usize) -> Vec<f64> {
        self.marginals
            .iter()
            .enumerate()
            .map(|(j, mu)| {
                let (lo, hi) = mu.support();
                (0..intervals)
                    .map(|k| {
                        let ga = lo + (hi - lo) * k as f64 / intervals as f64;
                        let gb = lo + (hi - lo) * (k + 1) as f64 / intervals as f64;
                        let (fa, fb) = (mu.cdf(ga), mu.cdf(gb));
                        let pushed: f64 = self
                            .cells
                            .iter()
                            .map(|c| {
                                let (s, e) = (c.starts[j], c.starts[j] + c.mass);
                                (e.min(fb) - s.max(fa)).max(0.0)
                            })
                            .sum();
                        (pushed - (fb - fa)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Average over `t ∈ [0, 1]` of `min_k ((1 - t) a_k + t b_k)`.
pub(crate) fn mean_of_min_linear(a: &[f64], b: &[f64]) -> f64 {
    let mut ts = vec![0.0, 1.0];
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                ts.push(da / (da - db));
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut total = 0.0;
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 <= t0 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        let k = (0..a.len())
            .min_by(|&i, &j| {
                let vi = a[i] + tm * (b[i] - a[i]);
                let vj = a[j] + tm * (b[j] - a[j]);
                vi.total_cmp(&vj)
            })
            .unwrap();
        let v0 = a[k] + t0 * (b[k] - a[k]);
        let v1 = a[k] + t1 * (b[k] - a[k]);
        total += (t1 - t0) * 0.5 * (v0 + v1);
    }
    total
}
