//! Costs of the form `c = min_i l_i` with affine `l_i`, and the geometric
//! predicates attached to them.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance for comparing coefficients.
pub const COEF_RTOL: f64 = 1e-12;

/// `l(x, y) = a x + b y + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffinePiece {
    pub a: f64,
    pub b: f64,
    pub c0: f64,
}

impl AffinePiece {
    pub const fn new(a: f64, b: f64, c0: f64) -> Self {
        AffinePiece { a, b, c0 }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c0
    }
}

impl From<[f64; 3]> for AffinePiece {
    fn from(v: [f64; 3]) -> Self {
        AffinePiece::new(v[0], v[1], v[2])
    }
}

/// Closed axis-aligned rectangle `[x.0, x.1] × [y.0, y.1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Rect { x, y }
    }

    /// Grows each side by `fraction` of the side length.
    pub fn expanded(&self, fraction: f64) -> Rect {
        let dx = (self.x.1 - self.x.0) * fraction;
        let dy = (self.y.1 - self.y.0) * fraction;
        Rect::new((self.x.0 - dx, self.x.1 + dx), (self.y.0 - dy, self.y.1 + dy))
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x.0, self.y.0),
            (self.x.0, self.y.1),
            (self.x.1, self.y.0),
            (self.x.1, self.y.1),
        ]
    }

    fn contains(&self, p: (f64, f64), tol: f64) -> bool {
        p.0 >= self.x.0 - tol && p.0 <= self.x.1 + tol && p.1 >= self.y.0 - tol && p.1 <= self.y.1 + tol
    }
}

/// Why a pair of pieces violates the non-degeneracy assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairDefect {
    IdenticalPieces,
    /// Parallel planes: the coincidence set is empty.
    EmptyCoincidence,
    /// The coincidence line is vertical.
    EqualXSlopes,
    /// The coincidence line is horizontal.
    EqualYSlopes,
}

impl fmt::Display for PairDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairDefect::IdenticalPieces => "identical pieces",
            PairDefect::EmptyCoincidence => "identical slopes, coincidence set empty",
            PairDefect::EqualXSlopes => "equal x-slopes",
            PairDefect::EqualYSlopes => "equal y-slopes",
        })
    }
}

/// Offending pair, 0-based indices with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairFailure {
    pub i: usize,
    pub j: usize,
    pub defect: PairDefect,
}

impl fmt::Display for PairFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pair ({},{}): {}", self.i + 1, self.j + 1, self.defect)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseReport {
    pub passed: bool,
    pub failures: Vec<PairFailure>,
}

/// Lower envelope of a non-empty family of affine pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinAffineCost {
    pieces: Vec<AffinePiece>,
    validated: bool,
}

/// Outcome of [`MinAffineCost::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Validation {
    pub pairwise: PairwiseReport,
    /// 0-based indices into the original family.
    pub essential: Vec<usize>,
    pub dropped: Vec<usize>,
}

impl MinAffineCost {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Degenerate("cost has no pieces".into()));
        }
        if pieces.iter().any(|p| !(p.a.is_finite() && p.b.is_finite() && p.c0.is_finite())) {
            return Err(Error::Degenerate("cost coefficients must be finite".into()));
        }
        Ok(MinAffineCost { pieces, validated: false })
    }

    pub fn from_triples(triples: &[[f64; 3]]) -> Result<Self> {
        Self::new(triples.iter().copied().map(AffinePiece::from).collect())
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Envelope value and the lowest index attaining it.
    pub fn evaluate(&self, x: f64, y: f64) -> (f64, usize) {
        let mut best = (self.pieces[0].eval(x, y), 0);
        for (i, p) in self.pieces.iter().enumerate().skip(1) {
            let v = p.eval(x, y);
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.evaluate(x, y).0
    }

    fn coef_tolerance(&self) -> f64 {
        let scale = self
            .pieces
            .iter()
            .flat_map(|p| [p.a.abs(), p.b.abs()])
            .fold(0.0, f64::max);
        COEF_RTOL * scale
    }

    pub fn validate_pairwise_a(&self) -> PairwiseReport {
        let tau = self.coef_tolerance();
        let c_tau = COEF_RTOL * self.pieces.iter().map(|p| p.c0.abs()).fold(1.0, f64::max);
        let mut failures = Vec::new();
        for i in 0..self.pieces.len() {
            for j in i + 1..self.pieces.len() {
                let (p, q) = (self.pieces[i], self.pieces[j]);
                let same_a = (p.a - q.a).abs() <= tau;
                let same_b = (p.b - q.b).abs() <= tau;
                let defect = match (same_a, same_b) {
                    (true, true) if (p.c0 - q.c0).abs() <= c_tau => Some(PairDefect::IdenticalPieces),
                    (true, true) => Some(PairDefect::EmptyCoincidence),
                    (true, false) => Some(PairDefect::EqualXSlopes),
                    (false, true) => Some(PairDefect::EqualYSlopes),
                    (false, false) => None,
                };
                if let Some(defect) = defect {
                    failures.push(PairFailure { i, j, defect });
                }
            }
        }
        PairwiseReport { passed: failures.is_empty(), failures }
    }

    /// Largest `δ` such that `l_i + δ <= l_j` for all `j != i` at some point
    /// of `rect`. Infinite for a single-piece family.
    pub fn essential_margin(&self, i: usize, rect: &Rect) -> f64 {
        let others: Vec<usize> = (0..self.pieces.len()).filter(|&j| j != i).collect();
        if others.is_empty() {
            return f64::INFINITY;
        }
        let li = self.pieces[i];
        let slack = |p: (f64, f64)| {
            others
                .iter()
                .map(|&j| self.pieces[j].eval(p.0, p.1) - li.eval(p.0, p.1))
                .fold(f64::INFINITY, f64::min)
        };

        // The slack is concave piecewise-linear; its maximum over the box sits
        // at a corner, on an edge where two others tie, or where three tie.
        let mut candidates: Vec<(f64, f64)> = rect.corners().to_vec();
        for (s, &j) in others.iter().enumerate() {
            for &k in &others[s + 1..] {
                let (pj, pk) = (self.pieces[j], self.pieces[k]);
                let (da, db, dc) = (pj.a - pk.a, pj.b - pk.b, pj.c0 - pk.c0);
                // da x + db y + dc = 0 against the four edges
                if db != 0.0 {
                    for x in [rect.x.0, rect.x.1] {
                        candidates.push((x, -(da * x + dc) / db));
                    }
                }
                if da != 0.0 {
                    for y in [rect.y.0, rect.y.1] {
                        candidates.push((-(db * y + dc) / da, y));
                    }
                }
            }
        }
        for (s, &j) in others.iter().enumerate() {
            for (t, &k) in others.iter().enumerate().skip(s + 1) {
                for &l in &others[t + 1..] {
                    let (pj, pk, pl) = (self.pieces[j], self.pieces[k], self.pieces[l]);
                    if let Some(p) = solve2(
                        [pj.a - pk.a, pj.b - pk.b],
                        pk.c0 - pj.c0,
                        [pj.a - pl.a, pj.b - pl.b],
                        pl.c0 - pj.c0,
                    ) {
                        candidates.push(p);
                    }
                }
            }
        }
        let scale = rect.x.0.abs().max(rect.x.1.abs()).max(rect.y.0.abs()).max(rect.y.1.abs()).max(1.0);
        candidates
            .into_iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite() && rect.contains(*p, 1e-12 * scale))
            .map(|p| {
                (p.0.clamp(rect.x.0, rect.x.1), p.1.clamp(rect.y.0, rect.y.1))
            })
            .map(slack)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of pieces whose active region has non-empty interior inside `rect`.
    pub fn essential_pieces(&self, rect: &Rect) -> Vec<usize> {
        let scale = self
            .pieces
            .iter()
            .map(|p| {
                p.a.abs() * rect.x.0.abs().max(rect.x.1.abs())
                    + p.b.abs() * rect.y.0.abs().max(rect.y.1.abs())
                    + p.c0.abs()
            })
            .fold(1.0, f64::max);
        (0..self.pieces.len())
            .filter(|&i| self.essential_margin(i, rect) > COEF_RTOL * scale)
            .collect()
    }

    pub fn subfamily(&self, indices: &[usize]) -> Result<MinAffineCost> {
        MinAffineCost::new(indices.iter().map(|&i| self.pieces[i]).collect())
    }

    /// Drops inessential pieces and checks the non-degeneracy assumption on
    /// what remains. The returned cost is marked validated.
    pub fn validate(&self, rect: &Rect) -> Result<(MinAffineCost, Validation)> {
        let pairwise = self.validate_pairwise_a();
        let essential = self.essential_pieces(rect);
        if essential.is_empty() {
            return Err(Error::NoEssentialPieces);
        }
        let dropped: Vec<usize> = (0..self.len()).filter(|i| !essential.contains(i)).collect();
        let mut reduced = self.subfamily(&essential)?;
        let reduced_report = reduced.validate_pairwise_a();
        if !reduced_report.passed {
            let msg = reduced_report
                .failures
                .iter()
                .map(|f| {
                    PairFailure { i: essential[f.i], j: essential[f.j], defect: f.defect }.to_string()
                })
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::Degenerate(msg));
        }
        reduced.validated = true;
        Ok((reduced, Validation { pairwise, essential, dropped }))
    }

    /// Linear forms `(coefficients, offset)` in the variables `(x, y)`.
    pub fn linear_forms(&self) -> Vec<(Vec<f64>, f64)> {
        self.pieces.iter().map(|p| (vec![p.a, p.b], p.c0)).collect()
    }
}

/// Solves `r1 · p = s1`, `r2 · p = s2`.
fn solve2(r1: [f64; 2], s1: f64, r2: [f64; 2], s2: f64) -> Option<(f64, f64)> {
    let det = r1[0] * r2[1] - r1[1] * r2[0];
    let scale = r1[0].abs().max(r1[1].abs()) * r2[0].abs().max(r2[1].abs());
    if det.abs() <= 1e-14 * scale || scale == 0.0 {
        return None;
    }
    Some(((s1 * r2[1] - r1[1] * s2) / det, (r1[0] * s2 - s1 * r2[0]) / det))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// `{x <= x0, y >= y0} ∪ {x >= x0, y <= y0}`
    AntiMonotone,
    /// `{x <= x0, y <= y0} ∪ {x >= x0, y >= y0}`
    Comonotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn flipped(self) -> Relation {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
        }
    }

    fn holds(self, value: f64, anchor: f64, tol: f64) -> bool {
        match self {
            Relation::Le => value <= anchor + tol,
            Relation::Ge => value >= anchor - tol,
        }
    }
}

/// Union of orthants anchored at a point of the coincidence set, chosen so
/// that it meets the coincidence set only at the anchor.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SupportRegion {
    TwoPiece { anchor: (f64, f64), orientation: Orientation },
    MultiMarginal { anchor: Vec<f64>, signs: Vec<Relation> },
}

impl SupportRegion {
    /// Region for the pair `(l1, l2)` anchored at `anchor`, which should lie
    /// on `{l1 = l2}`.
    pub fn for_pair(l1: &AffinePiece, l2: &AffinePiece, anchor: (f64, f64)) -> Self {
        // direction of {l1 = l2} is (b1 - b2, a2 - a1)
        let dx = l1.b - l2.b;
        let dy = l2.a - l1.a;
        let orientation =
            if dx * dy > 0.0 { Orientation::AntiMonotone } else { Orientation::Comonotone };
        SupportRegion::TwoPiece { anchor, orientation }
    }

    /// `Q_t` for a coincidence-line direction `v` (sign of `v_1` irrelevant).
    pub fn for_direction(direction: &[f64], anchor: Vec<f64>) -> Result<Self> {
        if direction.len() != anchor.len() {
            return Err(Error::DimensionMismatch { expected: anchor.len(), got: direction.len() });
        }
        let sign = if direction[0] >= 0.0 { 1.0 } else { -1.0 };
        let signs = direction
            .iter()
            .map(|v| if v * sign > 0.0 { Relation::Ge } else { Relation::Le })
            .collect();
        Ok(SupportRegion::MultiMarginal { anchor, signs })
    }

    pub fn dimension(&self) -> usize {
        match self {
            SupportRegion::TwoPiece { .. } => 2,
            SupportRegion::MultiMarginal { anchor, .. } => anchor.len(),
        }
    }

    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        self.contains_within(point, 0.0)
    }

    /// Membership with every inequality relaxed by `tol`.
    pub fn contains_within(&self, point: &[f64], tol: f64) -> Result<bool> {
        if point.len() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), got: point.len() });
        }
        Ok(match self {
            SupportRegion::TwoPiece { anchor, orientation } => {
                let (x, y) = (point[0], point[1]);
                let (x0, y0) = *anchor;
                let (lo_x, hi_x) = (x <= x0 + tol, x >= x0 - tol);
                let (lo_y, hi_y) = (y <= y0 + tol, y >= y0 - tol);
                match orientation {
                    Orientation::AntiMonotone => (lo_x && hi_y) || (hi_x && lo_y),
                    Orientation::Comonotone => (lo_x && lo_y) || (hi_x && hi_y),
                }
            }
            SupportRegion::MultiMarginal { anchor, signs } => (0..point.len()).any(|i| {
                (0..point.len()).all(|j| {
                    let rel = if j == i { signs[j].flipped() } else { signs[j] };
                    rel.holds(point[j], anchor[j], tol)
                })
            }),
        })
    }
}

/// Affine function of `m` variables, `coeffs · x + offset`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiAffinePiece {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl MultiAffinePiece {
    pub fn new(coeffs: Vec<f64>, offset: f64) -> Self {
        MultiAffinePiece { coeffs, offset }
    }

    pub fn coordinate(m: usize, i: usize) -> Self {
        let mut coeffs = vec![0.0; m];
        coeffs[i] = 1.0;
        MultiAffinePiece { coeffs, offset: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonDegeneracyReport {
    pub passed: bool,
    /// Unit direction of the coincidence line, first component positive.
    pub direction: Vec<f64>,
    /// A point of the coincidence line.
    pub point: Vec<f64>,
    /// 0-based coordinates where the direction vanishes.
    pub zero_components: Vec<usize>,
}

/// Solves `l_1 = … = l_m` and checks that it is a line whose direction has
/// no zero component.
pub fn validate_mm_nondegeneracy(pieces: &[MultiAffinePiece]) -> Result<NonDegeneracyReport> {
    let m = pieces.len();
    if m < 2 {
        return Err(Error::TooFewMarginals(m));
    }
    if let Some(p) = pieces.iter().find(|p| p.coeffs.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: p.coeffs.len() });
    }
    let scale = pieces.iter().flat_map(|p| p.coeffs.iter().map(|c| c.abs())).fold(0.0, f64::max);
    let tau = COEF_RTOL * scale.max(f64::MIN_POSITIVE);

    // (a_1 - a_k) · x = c_k - c_1 for k = 2..m, augmented
    let mut rows: Vec<Vec<f64>> = (1..m)
        .map(|k| {
            let mut row: Vec<f64> =
                pieces[0].coeffs.iter().zip(&pieces[k].coeffs).map(|(a, b)| a - b).collect();
            row.push(pieces[k].offset - pieces[0].offset);
            row
        })
        .collect();

    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..m {
        if r == rows.len() {
            break;
        }
        let (best, val) = (r..rows.len())
            .map(|i| (i, rows[i][col].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tau {
            continue;
        }
        rows.swap(r, best);
        let p = rows[r][col];
        for v in rows[r].iter_mut() {
            *v /= p;
        }
        for i in 0..rows.len() {
            if i != r {
                let f = rows[i][col];
                if f != 0.0 {
                    for c in 0..=m {
                        rows[i][c] -= f * rows[r][c];
                    }
                }
            }
        }
        pivot_cols.push(col);
        r += 1;
    }
    if pivot_cols.len() != m - 1 {
        return Err(Error::Degenerate(format!(
            "coincidence set of the {m} pieces is not a line (rank {} of {})",
            pivot_cols.len(),
            m - 1
        )));
    }
    let free = (0..m).find(|c| !pivot_cols.contains(c)).unwrap();
    let mut direction = vec![0.0; m];
    let mut point = vec![0.0; m];
    direction[free] = 1.0;
    for (row, &col) in rows.iter().zip(&pivot_cols) {
        direction[col] = -row[free];
        point[col] = row[m];
    }
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if direction[0] < 0.0 { -1.0 } else { 1.0 };
    for v in direction.iter_mut() {
        *v *= sign / norm;
    }
    let zero_components: Vec<usize> =
        (0..m).filter(|&k| direction[k].abs() <= COEF_RTOL).collect();
    Ok(NonDegeneracyReport { passed: zero_components.is_empty(), direction, point, zero_components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cost(t: &[[f64; 3]]) -> MinAffineCost {
        MinAffineCost::from_triples(t).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let xy = cost(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(xy.evaluate(0.3, 0.7), (0.3, 0));
        assert_eq!(xy.evaluate(0.5, 0.5), (0.5, 0));
        let three = cost(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [1.0, 1.0, -1.0]]);
        let (v, i) = three.evaluate(0.8, 0.1);
        assert_abs_diff_eq!(v, -0.1, epsilon = 1e-15);
        assert_eq!(i, 2);
    }

    #[test]
    fn pairwise_a_examples() {
        let r = cost(&[[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]).validate_pairwise_a();
        assert!(!r.passed);
        assert_eq!(r.failures, vec![PairFailure { i: 0, j: 1, defect: PairDefect::EqualXSlopes }]);
        assert_eq!(r.failures[0].to_string(), "pair (1,2): equal x-slopes");

        assert!(cost(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).validate_pairwise_a().passed);

        let r = cost(&[[1.0, 1.0, 0.0], [1.0, 1.0, 1.0]]).validate_pairwise_a();
        assert_eq!(r.failures[0].defect, PairDefect::EmptyCoincidence);
        let r = cost(&[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]]).validate_pairwise_a();
        assert_eq!(r.failures[0].defect, PairDefect::IdenticalPieces);
        let r = cost(&[[1.0, 2.0, 0.0], [3.0, 2.0, 0.0]]).validate_pairwise_a();
        assert_eq!(r.failures[0].defect, PairDefect::EqualYSlopes);
    }

    #[test]
    fn essential_examples() {
        let unit = Rect::new((0.0, 1.0), (0.0, 1.0));
        assert_eq!(cost(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).essential_pieces(&unit), vec![0, 1]);
        let with_far = cost(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 10.0]]);
        assert_eq!(with_far.essential_pieces(&unit), vec![0, 1]);
        assert_eq!(cost(&[[1.0, 0.0, 0.0]]).essential_pieces(&unit), vec![0]);
    }

    #[test]
    fn essential_needs_three_way_vertex() {
        // slack of piece 0 is min(x, y, 1 - x - y), largest at (1/3, 1/3)
        let c = cost(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, -1.0, 1.0]]);
        let unit = Rect::new((0.0, 1.0), (0.0, 1.0));
        assert_abs_diff_eq!(c.essential_margin(0, &unit), 1.0 / 3.0, epsilon = 1e-12);
        let tight = cost(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.2]]);
        assert_eq!(tight.essential_pieces(&unit), vec![0, 1]);
        // max over the box of min(x, y) - 1.2
        assert_abs_diff_eq!(tight.essential_margin(2, &unit), -0.2, epsilon = 1e-12);
    }

    #[test]
    fn validate_drops_inessential_and_rejects_degenerate() {
        let unit = Rect::new((0.0, 1.0), (0.0, 1.0)).expanded(0.01);
        let (reduced, v) =
            cost(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 10.0]]).validate(&unit).unwrap();
        assert_eq!(reduced.len(), 2);
        assert!(reduced.is_validated());
        assert_eq!(v.dropped, vec![2]);
        let err = cost(&[[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]).validate(&unit).unwrap_err();
        assert!(matches!(err, Error::Degenerate(ref m) if m.contains("equal x-slopes")));
    }

    #[test]
    fn region_examples() {
        let anti = SupportRegion::TwoPiece { anchor: (0.5, 0.5), orientation: Orientation::AntiMonotone };
        assert!(anti.contains(&[0.2, 0.8]).unwrap());
        assert!(!anti.contains(&[0.8, 0.8]).unwrap());
        assert!(matches!(anti.contains(&[0.1]), Err(Error::DimensionMismatch { .. })));

        let s = 0.4;
        let q = SupportRegion::MultiMarginal { anchor: vec![s; 3], signs: vec![Relation::Ge; 3] };
        assert!(q.contains(&[s - 0.1, s + 0.2, s + 0.3]).unwrap());
        assert!(!q.contains(&[s - 0.1, s - 0.2, s + 0.3]).unwrap());
        assert!(!q.contains(&[s + 0.1, s + 0.2, s + 0.3]).unwrap());
    }

    #[test]
    fn region_for_pair_excludes_coincidence_line() {
        let x = AffinePiece::new(1.0, 0.0, 0.0);
        let y = AffinePiece::new(0.0, 1.0, 0.0);
        let r = SupportRegion::for_pair(&x, &y, (0.5, 0.5));
        assert_eq!(r, SupportRegion::TwoPiece { anchor: (0.5, 0.5), orientation: Orientation::AntiMonotone });
        // min(x, -y): coincidence line y = -x has negative slope
        let neg = AffinePiece::new(0.0, -1.0, 0.0);
        let r = SupportRegion::for_pair(&x, &neg, (0.0, 0.0));
        assert!(matches!(r, SupportRegion::TwoPiece { orientation: Orientation::Comonotone, .. }));
        assert!(!r.contains(&[1.0, -1.0]).unwrap());
    }

    #[test]
    fn region_two_marginal_agrees_with_orthant_form() {
        let q2 = SupportRegion::for_direction(&[1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let anti = SupportRegion::TwoPiece { anchor: (0.5, 0.5), orientation: Orientation::AntiMonotone };
        for p in [[0.2, 0.8], [0.8, 0.8], [0.1, 0.2], [0.9, 0.1]] {
            assert_eq!(q2.contains(&p).unwrap(), anti.contains(&p).unwrap());
        }
    }

    #[test]
    fn nondegeneracy_examples() {
        let coords: Vec<_> = (0..3).map(|i| MultiAffinePiece::coordinate(3, i)).collect();
        let r = validate_mm_nondegeneracy(&coords).unwrap();
        assert!(r.passed);
        for v in &r.direction {
            assert_abs_diff_eq!(*v, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        }

        // l1 = x1, l2 = x2, l3 = x1 + x3: the line {(t, t, 0)}
        let zero = vec![
            MultiAffinePiece::coordinate(3, 0),
            MultiAffinePiece::coordinate(3, 1),
            MultiAffinePiece::new(vec![1.0, 0.0, 1.0], 0.0),
        ];
        let r = validate_mm_nondegeneracy(&zero).unwrap();
        assert!(!r.passed);
        assert_eq!(r.zero_components, vec![2]);

        let two = vec![MultiAffinePiece::coordinate(2, 0), MultiAffinePiece::coordinate(2, 1)];
        let r = validate_mm_nondegeneracy(&two).unwrap();
        assert!(r.passed);
        assert_abs_diff_eq!(r.direction[0], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn nondegeneracy_x1_x2_x1_plus_x2_minus_x3() {
        // x1 = x2 and x1 = x1 + x2 - x3 force x1 = x2 = x3: the diagonal.
        let pieces = vec![
            MultiAffinePiece::coordinate(3, 0),
            MultiAffinePiece::coordinate(3, 1),
            MultiAffinePiece::new(vec![1.0, 1.0, -1.0], 0.0),
        ];
        let r = validate_mm_nondegeneracy(&pieces).unwrap();
        assert!(r.passed);
        for v in &r.direction {
            assert_abs_diff_eq!(*v, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn nondegeneracy_rank_deficient() {
        let pieces = vec![
            MultiAffinePiece::coordinate(3, 0),
            MultiAffinePiece::new(vec![1.0, 0.0, 0.0], 1.0),
            MultiAffinePiece::coordinate(3, 2),
        ];
        assert!(matches!(validate_mm_nondegeneracy(&pieces), Err(Error::Degenerate(_))));
    }

    #[test]
    fn nondegeneracy_point_lies_on_line() {
        let pieces = vec![
            MultiAffinePiece::new(vec![1.0, 2.0, 0.0], 1.0),
            MultiAffinePiece::new(vec![0.0, 1.0, 1.0], -2.0),
            MultiAffinePiece::new(vec![2.0, 0.0, 1.0], 0.5),
        ];
        let r = validate_mm_nondegeneracy(&pieces).unwrap();
        for t in [0.0, 1.3, -2.0] {
            let p: Vec<f64> = r.point.iter().zip(&r.direction).map(|(p, v)| p + t * v).collect();
            let v0 = pieces[0].eval(&p);
            for piece in &pieces[1..] {
                assert_abs_diff_eq!(piece.eval(&p), v0, epsilon = 1e-12);
            }
        }
    }
}
