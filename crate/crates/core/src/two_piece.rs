//! Closed-form solution for the envelope of two affine pieces.
//!
//! After subtracting a plane and rescaling, `min(l1, l2)` becomes
//! `base + alpha * min(x', b y'')` with `alpha, b > 0`, where `x'` and `y''`
//! are shifted and possibly reflected copies of `x` and `y`. In those
//! coordinates the optimal plan sends the part of `μ'` left of the split
//! point `s` to the part of `ν'` above `s / b`, and the rest to the rest.

use serde::Serialize;

use crate::cost::{AffinePiece, MinAffineCost, SupportRegion};
use crate::error::{Error, Result};
use crate::measure::Measure1D;
use crate::plan::TransportPlan;

const BISECTION_STEPS: usize = 400;
/// Rounding slack when testing `g(s) >= 0` on flat stretches.
const BALANCE_SLACK: f64 = 1e-15;

/// `min(l1, l2)(x, y) = base(x, y) + alpha * min(x', b * y'')` with
/// `x' = x_sign * x + x_shift` and `y'' = y_sign * y + y_shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalization {
    pub alpha: f64,
    pub b: f64,
    pub x_sign: f64,
    pub x_shift: f64,
    pub y_sign: f64,
    pub y_shift: f64,
    /// Plane subtracted from both pieces; it has no constant term.
    pub base: AffinePiece,
}

impl Normalization {
    pub fn to_normalized(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x_sign * x + self.x_shift, self.y_sign * y + self.y_shift)
    }

    pub fn from_normalized(&self, xn: f64, yn: f64) -> (f64, f64) {
        (self.x_sign * (xn - self.x_shift), self.y_sign * (yn - self.y_shift))
    }

    /// Evaluates the right-hand side of the reduction at an original point.
    pub fn reduced_value(&self, x: f64, y: f64) -> f64 {
        let (xn, yn) = self.to_normalized(x, y);
        self.base.eval(x, y) + self.alpha * xn.min(self.b * yn)
    }

    /// The plan-independent part `∫ base d π = ∫ base_x dμ + ∫ base_y dν`.
    pub fn correction(&self, mu: &Measure1D, nu: &Measure1D) -> f64 {
        self.base.a * mu.mean() + self.base.b * nu.mean()
    }
}

pub fn normalize(l1: &AffinePiece, l2: &AffinePiece) -> Result<Normalization> {
    let pair = MinAffineCost::new(vec![*l1, *l2])?;
    let report = pair.validate_pairwise_a();
    if let Some(f) = report.failures.first() {
        return Err(Error::Degenerate(f.to_string()));
    }
    // Subtracting a2 x + b1 y leaves l1 depending on x only and l2 on y only.
    let base = AffinePiece::new(l2.a, l1.b, 0.0);
    let slope_x = l1.a - l2.a;
    let slope_y = l2.b - l1.b;
    let alpha = slope_x.abs();
    Ok(Normalization {
        alpha,
        b: slope_y.abs() / alpha,
        x_sign: slope_x.signum(),
        x_shift: l1.c0 / alpha,
        y_sign: slope_y.signum(),
        y_shift: l2.c0 / slope_y.abs(),
        base,
    })
}

#[derive(Debug, Clone)]
pub struct TwoPieceSolution {
    /// Split point in normalized coordinates.
    pub split: f64,
    /// `(s, s / b)` in normalized coordinates.
    pub anchor_normalized: (f64, f64),
    /// Pre-image of the anchor; lies on `{l1 = l2}`.
    pub anchor: (f64, f64),
    pub value: f64,
    /// Value of the normalized problem `min(x', b y'')`.
    pub normalized_value: f64,
    pub normalization: Normalization,
    pub region: SupportRegion,
    /// `μ'(-∞, s) - ν'(s / b, +∞)` at the returned split.
    pub balance_residual: f64,
    /// μ-mass sent along the first piece.
    pub first_piece_mass: f64,
    pub plan: TransportPlan,
}

pub fn solve_two_piece(
    mu: &Measure1D,
    nu: &Measure1D,
    l1: &AffinePiece,
    l2: &AffinePiece,
) -> Result<TwoPieceSolution> {
    let norm = normalize(l1, l2)?;
    let mu_n = mu.affine_image(norm.x_sign, norm.x_shift)?;
    let nu_n = nu.affine_image(norm.y_sign, norm.y_shift)?;
    let b = norm.b;

    let balance = |s: f64| mu_n.cdf(s) + nu_n.cdf(s / b) - 1.0;
    let (mu_lo, mu_hi) = mu_n.support();
    let (nu_lo, nu_hi) = nu_n.support();
    let mut lo = mu_lo.min(b * nu_lo);
    let mut hi = mu_hi.max(b * nu_hi);
    let (g_lo, g_hi) = (balance(lo), balance(hi));
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(Error::RootBracket { g_lo, g_hi });
    }
    if g_lo >= -BALANCE_SLACK {
        hi = lo;
    }
    // Smallest s with g(s) >= 0: keep g(lo) < 0 <= g(hi).
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(mid) >= -BALANCE_SLACK {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = hi;
    let residual = balance(s);

    let normalized_value = mu_n.partial_first_moment(f64::NEG_INFINITY, s)
        + b * nu_n.partial_first_moment(f64::NEG_INFINITY, s / b);
    let value = norm.alpha * normalized_value + norm.correction(mu, nu);

    let anchor = norm.from_normalized(s, s / b);
    let region = SupportRegion::for_pair(l1, l2, anchor);

    // In normalized coordinates cell A is {x' < s} × {y'' > s/b}; map the
    // level slices back through the reflections.
    let p = mu_n.cdf(s);
    let (x_a, x_b) = if norm.x_sign > 0.0 { (0.0, p) } else { (1.0 - p, 0.0) };
    let (y_a, y_b) = if norm.y_sign > 0.0 { (1.0 - p, 0.0) } else { (0.0, p) };
    let plan = TransportPlan::new(
        vec![mu.clone(), nu.clone()],
        vec![(p, vec![x_a, y_a], vec![false; 2]), (1.0 - p, vec![x_b, y_b], vec![false; 2])],
    )?;

    Ok(TwoPieceSolution {
        split: s,
        anchor_normalized: (s, s / b),
        anchor,
        value,
        normalized_value,
        normalization: norm,
        region,
        balance_residual: residual,
        first_piece_mass: p,
        plan,
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

    const X: AffinePiece = AffinePiece::new(1.0, 0.0, 0.0);
    const Y: AffinePiece = AffinePiece::new(0.0, 1.0, 0.0);

    #[test]
    fn normalize_identity_cases() {
        let n = normalize(&X, &Y).unwrap();
        assert_eq!((n.alpha, n.b, n.x_sign, n.y_sign), (1.0, 1.0, 1.0, 1.0));
        assert_eq!((n.x_shift, n.y_shift), (0.0, 0.0));
        assert_eq!(n.base, AffinePiece::new(0.0, 0.0, 0.0));
        let n = normalize(&X, &AffinePiece::new(0.0, 2.0, 0.0)).unwrap();
        assert_eq!(n.b, 2.0);
        assert_eq!(n.correction(&unif(0.0, 1.0), &unif(0.0, 1.0)), 0.0);
    }

    #[test]
    fn normalize_with_reflections() {
        // l1 = x + y, l2 = 2x - y: subtract 2x + y, leaving -x and -2y.
        let l1 = AffinePiece::new(1.0, 1.0, 0.0);
        let l2 = AffinePiece::new(2.0, -1.0, 0.0);
        let n = normalize(&l1, &l2).unwrap();
        assert_eq!(n.base, AffinePiece::new(2.0, 1.0, 0.0));
        assert_eq!((n.alpha, n.b, n.x_sign, n.y_sign), (1.0, 2.0, -1.0, -1.0));
        for (x, y) in [(0.3, -1.2), (2.0, 0.5), (-0.7, -0.1), (1.5, 1.5), (0.0, 4.0)] {
            let direct = l1.eval(x, y).min(l2.eval(x, y));
            assert_abs_diff_eq!(n.reduced_value(x, y), direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn normalize_with_offsets_and_scaling() {
        let l1 = AffinePiece::new(-3.0, 0.5, 1.25);
        let l2 = AffinePiece::new(2.0, -1.5, -0.75);
        let n = normalize(&l1, &l2).unwrap();
        assert!(n.alpha > 0.0 && n.b > 0.0);
        for (x, y) in [(0.1, 0.2), (-2.0, 3.0), (5.0, -1.0), (0.4, 0.4), (1.0, -3.3)] {
            let direct = l1.eval(x, y).min(l2.eval(x, y));
            assert_abs_diff_eq!(n.reduced_value(x, y), direct, epsilon = 1e-13);
        }
    }

    #[test]
    fn uniform_min_xy() {
        let sol = solve_two_piece(&unif(0.0, 1.0), &unif(0.0, 1.0), &X, &Y).unwrap();
        assert_abs_diff_eq!(sol.split, 0.5, epsilon = 1e-12);
        // ∫_0^{1/2} x dx + ∫_0^{1/2} y dy
        assert_abs_diff_eq!(sol.value, 0.25, epsilon = 1e-12);
        assert!(sol.balance_residual.abs() <= 1e-12);
    }

    #[test]
    fn uniform_min_x_2y() {
        let y2 = AffinePiece::new(0.0, 2.0, 0.0);
        let sol = solve_two_piece(&unif(0.0, 1.0), &unif(0.0, 1.0), &X, &y2).unwrap();
        // s = 1 - s/2
        assert_abs_diff_eq!(sol.split, 2.0 / 3.0, epsilon = 1e-12);
        // 2/9 + 2 * (1/3)^2 / 2
        assert_abs_diff_eq!(sol.value, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_pair_rejected() {
        let err = solve_two_piece(&unif(0.0, 1.0), &unif(0.0, 1.0), &X, &AffinePiece::new(1.0, 1.0, 0.0))
            .unwrap_err();
        assert!(matches!(err, Error::Degenerate(ref m) if m.contains("equal x-slopes")));
    }

    #[test]
    fn smallest_split_on_flat_balance() {
        // Both marginals have a gap on (0.5, 1.5).
        let mu = build_measure(&MeasureSpec::PiecewiseDensity {
            breaks: vec![0.0, 0.5, 1.5, 2.0],
            densities: vec![1.0, 0.0, 1.0],
        })
        .unwrap();
        let nu = mu.clone();
        let sol = solve_two_piece(&mu, &nu, &X, &Y).unwrap();
        // g(s) = 2 F(s) - 1 is zero on [0.5, 1.5]; the smallest root is 0.5.
        assert_abs_diff_eq!(sol.split, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn value_matches_plan_cost_and_anchor_on_coincidence_line() {
        let mu = build_measure(&MeasureSpec::Triangular { lo: -1.0, mode: 0.5, hi: 2.0 }).unwrap();
        let nu = unif(0.0, 3.0);
        for (l1, l2) in [
            (AffinePiece::new(1.0, 1.0, 0.0), AffinePiece::new(2.0, -1.0, 0.0)),
            (AffinePiece::new(-1.0, 2.0, 0.5), AffinePiece::new(1.0, -1.0, -0.25)),
            (AffinePiece::new(3.0, 1.0, 0.0), AffinePiece::new(-2.0, 2.0, 1.0)),
        ] {
            let sol = solve_two_piece(&mu, &nu, &l1, &l2).unwrap();
            let forms = MinAffineCost::new(vec![l1, l2]).unwrap().linear_forms();
            assert_abs_diff_eq!(sol.plan.cost(&forms), sol.value, epsilon = 1e-10);
            let (x0, y0) = sol.anchor;
            assert_abs_diff_eq!(l1.eval(x0, y0), l2.eval(x0, y0), epsilon = 1e-9);
            for p in sol.plan.sample(500) {
                assert!(sol.region.contains_within(&p.point, 1e-9).unwrap(), "{:?}", p.point);
            }
            assert!(sol.plan.marginal_discrepancy(64).iter().all(|d| *d <= 1e-9));
        }
    }
}
