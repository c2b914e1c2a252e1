//! Atomless probability measures on the real line.
//!
//! Every family is compiled to a piecewise-linear CDF given by knots
//! `(x_k, F_k)`. On each segment the density is constant, so mass, quantile
//! and partial first moment are all exact closed forms.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Default tail mass cut from each side of an unbounded family.
pub const DEFAULT_TRUNCATION: f64 = 1e-9;

const TRIANGULAR_SEGMENTS: usize = 512;
const GAUSSIAN_SEGMENTS: usize = 2000;

/// A point mass produced by [`Measure1D::discretize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// Description of a marginal as it appears in a problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Triangular {
        lo: f64,
        mode: f64,
        hi: f64,
    },
    /// Piecewise-constant density: `densities[k]` holds on `[breaks[k], breaks[k+1])`.
    /// Need not integrate to 1; it is normalized.
    PiecewiseDensity {
        breaks: Vec<f64>,
        densities: Vec<f64>,
    },
    Gaussian {
        mean: f64,
        sd: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps_trunc: Option<f64>,
    },
    /// Samples either inline or from a text file with one number per line.
    Empirical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<Vec<f64>>,
    },
}

impl MeasureSpec {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        MeasureSpec::Uniform { lo, hi }
    }
}

/// Atomless probability measure with a piecewise-linear CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure1D {
    xs: Vec<f64>,
    fs: Vec<f64>,
    /// `moments[k]` is the first moment of the mass left of `xs[k]`.
    moments: Vec<f64>,
}

/// A stretch of the quantile function that is linear in the probability level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct QuantilePiece {
    pub p0: f64,
    pub p1: f64,
    pub x0: f64,
    pub x1: f64,
}

pub fn build_measure(spec: &MeasureSpec) -> Result<Measure1D> {
    match spec {
        MeasureSpec::Uniform { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidMeasure("uniform bounds must be finite".into()));
            }
            if lo == hi {
                return Err(Error::Atom(*lo));
            }
            if lo > hi {
                return Err(Error::InvalidMeasure(format!("uniform({lo}, {hi}) has lo > hi")));
            }
            Measure1D::from_cdf_knots(vec![*lo, *hi], vec![0.0, 1.0])
        }
        MeasureSpec::Triangular { lo, mode, hi } => triangular(*lo, *mode, *hi),
        MeasureSpec::PiecewiseDensity { breaks, densities } => piecewise_density(breaks, densities),
        MeasureSpec::Gaussian { mean, sd, eps_trunc } => {
            gaussian(*mean, *sd, eps_trunc.unwrap_or(DEFAULT_TRUNCATION))
        }
        MeasureSpec::Empirical { path, samples } => match (path, samples) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)?;
                let values = parse_samples(&text)?;
                Measure1D::from_samples(&values)
            }
            (None, Some(values)) => Measure1D::from_samples(values),
            _ => Err(Error::InvalidMeasure(
                "empirical marginal needs exactly one of `path` or `samples`".into(),
            )),
        },
    }
}

fn parse_samples(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(|line| {
            line.parse::<f64>()
                .map_err(|_| Error::InvalidMeasure(format!("cannot parse sample {line:?}")))
        })
        .collect()
}

fn triangular(lo: f64, mode: f64, hi: f64) -> Result<Measure1D> {
    if !(lo.is_finite() && mode.is_finite() && hi.is_finite()) || !(lo <= mode && mode <= hi) {
        return Err(Error::InvalidMeasure(format!(
            "triangular({lo}, {mode}, {hi}) needs lo <= mode <= hi"
        )));
    }
    if lo == hi {
        return Err(Error::Atom(lo));
    }
    let width = hi - lo;
    let cdf = |x: f64| {
        if x <= mode {
            if mode == lo {
                0.0
            } else {
                (x - lo) * (x - lo) / (width * (mode - lo))
            }
        } else {
            1.0 - (hi - x) * (hi - x) / (width * (hi - mode))
        }
    };
    let left = ((TRIANGULAR_SEGMENTS as f64) * (mode - lo) / width).round() as usize;
    let right = TRIANGULAR_SEGMENTS - left;
    let mut xs = Vec::with_capacity(TRIANGULAR_SEGMENTS + 1);
    xs.push(lo);
    for k in 1..=left {
        xs.push(lo + (mode - lo) * k as f64 / left as f64);
    }
    for k in 1..=right {
        xs.push(mode + (hi - mode) * k as f64 / right as f64);
    }
    let mut fs: Vec<f64> = xs.iter().map(|&x| cdf(x)).collect();
    fs[0] = 0.0;
    *fs.last_mut().unwrap() = 1.0;
    Measure1D::from_cdf_knots(xs, fs)
}

fn piecewise_density(breaks: &[f64], densities: &[f64]) -> Result<Measure1D> {
    if breaks.len() < 2 || densities.len() + 1 != breaks.len() {
        return Err(Error::InvalidMeasure(format!(
            "piecewise density needs n+1 breaks for n densities (got {} and {})",
            breaks.len(),
            densities.len()
        )));
    }
    if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidMeasure(
            "piecewise density breaks must be finite and strictly increasing".into(),
        ));
    }
    if densities.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::NotNormalizable("densities must be finite and non-negative".into()));
    }
    let mut cumulative = Vec::with_capacity(breaks.len());
    cumulative.push(0.0);
    for (k, d) in densities.iter().enumerate() {
        let last = cumulative[k];
        cumulative.push(last + d * (breaks[k + 1] - breaks[k]));
    }
    let total = *cumulative.last().unwrap();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NotNormalizable(format!("total mass {total}")));
    }
    let mut fs: Vec<f64> = cumulative.iter().map(|c| c / total).collect();
    *fs.last_mut().unwrap() = 1.0;
    Measure1D::from_cdf_knots(breaks.to_vec(), fs)
}

fn gaussian(mean: f64, sd: f64, eps: f64) -> Result<Measure1D> {
    if !(eps > 0.0 && eps <= 1e-6) {
        return Err(Error::InvalidMeasure(format!("truncation mass {eps} outside (0, 1e-6]")));
    }
    if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
        return Err(Error::InvalidMeasure(format!("gaussian({mean}, {sd}): need finite mean and sd > 0")));
    }
    // Work in standard units and mirror the upper half so the result is
    // symmetric about the mean to the last bit.
    let normal = Normal::new(0.0, 1.0).unwrap();
    let z = normal.inverse_cdf(eps);
    let ts: Vec<f64> = (0..=GAUSSIAN_SEGMENTS)
        .map(|k| z * (1.0 - 2.0 * k as f64 / GAUSSIAN_SEGMENTS as f64))
        .collect();
    let xs: Vec<f64> = ts.iter().map(|t| mean + sd * t).collect();
    let scale = 1.0 - 2.0 * eps;
    let mut fs: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let tail = (normal.cdf(-t.abs()) - eps) / scale;
            if t > 0.0 { 1.0 - tail } else { tail }.clamp(0.0, 1.0)
        })
        .collect();
    fs[0] = 0.0;
    *fs.last_mut().unwrap() = 1.0;
    Measure1D::from_cdf_knots(xs, fs)
}

impl Measure1D {
    /// Builds a measure from CDF knots. `fs` must start at 0, end at 1 and be
    /// non-decreasing; `xs` strictly increasing. Flat leading and trailing
    /// stretches are trimmed so the first and last knots bound the support.
    pub fn from_cdf_knots(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if xs.len() != fs.len() {
            return Err(Error::DimensionMismatch { expected: xs.len(), got: fs.len() });
        }
        if xs.len() < 2 {
            return Err(Error::InvalidMeasure("need at least two CDF knots".into()));
        }
        if xs.iter().chain(&fs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("CDF knots must be finite".into()));
        }
        for w in xs.windows(2).zip(fs.windows(2)) {
            let (x, f) = w;
            if x[0] == x[1] && f[0] != f[1] {
                return Err(Error::Atom(x[0]));
            }
            if x[0] >= x[1] {
                return Err(Error::InvalidMeasure("CDF knot positions must increase".into()));
            }
            if f[1] < f[0] {
                return Err(Error::InvalidMeasure("CDF values must be non-decreasing".into()));
            }
        }
        if fs[0].abs() > 1e-12 || (fs[fs.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "CDF must run from 0 to 1, got {} .. {}",
                fs[0],
                fs[fs.len() - 1]
            )));
        }

        let first = fs.iter().rposition(|&f| f <= 0.0).unwrap_or(0);
        let last = fs.iter().position(|&f| f >= 1.0).unwrap_or(fs.len() - 1);
        let xs = xs[first..=last].to_vec();
        let mut fs = fs[first..=last].to_vec();
        fs[0] = 0.0;
        *fs.last_mut().unwrap() = 1.0;

        let mut moments = Vec::with_capacity(xs.len());
        moments.push(0.0);
        for k in 1..xs.len() {
            let seg = (fs[k] - fs[k - 1]) * (xs[k - 1] + xs[k]) / 2.0;
            moments.push(moments[k - 1] + seg);
        }
        Ok(Measure1D { xs, fs, moments })
    }

    /// Linear interpolation between order statistics. Tied samples share a
    /// knot placed at their average rank, so the result has no atoms.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidMeasure("samples must be finite".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut values: Vec<f64> = Vec::new();
        let mut ranks: Vec<f64> = Vec::new();
        let mut start = 0;
        while start < sorted.len() {
            let end = sorted[start..].iter().position(|&v| v != sorted[start]).map_or(sorted.len(), |p| start + p);
            values.push(sorted[start]);
            ranks.push((start + end - 1) as f64 / 2.0);
            start = end;
        }
        if values.len() < 2 {
            return Err(Error::TooFewSamples(values.len()));
        }
        let r0 = ranks[0];
        let span = ranks[ranks.len() - 1] - r0;
        let mut fs: Vec<f64> = ranks.iter().map(|r| (r - r0) / span).collect();
        *fs.last_mut().unwrap() = 1.0;
        Measure1D::from_cdf_knots(values, fs)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.fs.iter().copied())
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn support_width(&self) -> f64 {
        let (lo, hi) = self.support();
        hi - lo
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let k = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (f0, f1) = (self.fs[k - 1], self.fs[k]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    /// `μ([lo, hi))`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            0.0
        } else {
            self.cdf(hi) - self.cdf(lo)
        }
    }

    /// Least `x` with `F(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.xs.len();
        if p <= 0.0 {
            return self.xs[0];
        }
        if p >= 1.0 {
            return self.xs[n - 1];
        }
        let k = self.fs.partition_point(|&f| f < p);
        let (f0, f1) = (self.fs[k - 1], self.fs[k]);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        (x0 + (x1 - x0) * (p - f0) / (f1 - f0)).min(x1)
    }

    /// Largest `x` with `F(x) <= p`. Differs from [`Self::quantile`] only at
    /// levels where the CDF is flat.
    pub fn quantile_upper(&self, p: f64) -> f64 {
        let n = self.xs.len();
        if p < 0.0 {
            return self.xs[0];
        }
        if p >= 1.0 {
            return self.xs[n - 1];
        }
        let k = self.fs.partition_point(|&f| f <= p) - 1;
        let (f0, f1) = (self.fs[k], self.fs[k + 1]);
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        (x0 + (x1 - x0) * (p - f0) / (f1 - f0)).min(x1)
    }

    fn moment_below(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return self.moments[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let density = (self.fs[k] - self.fs[k - 1]) / (x1 - x0);
        self.moments[k - 1] + density * (x - x0) * (x + x0) / 2.0
    }

    /// `∫_{[lo, hi)} x dμ`; either end may be infinite.
    pub fn partial_first_moment(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            0.0
        } else {
            self.moment_below(hi) - self.moment_below(lo)
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments[self.moments.len() - 1]
    }

    /// `count` equal-weight atoms at the quantile midpoints `q((k - 1/2) / count)`.
    pub fn discretize(&self, count: usize) -> Vec<Atom> {
        if count == 0 {
            return Vec::new();
        }
        let weight = 1.0 / count as f64;
        let mut atoms: Vec<Atom> = (0..count)
            .map(|k| Atom {
                position: self.quantile((k as f64 + 0.5) / count as f64),
                weight,
            })
            .collect();
        // Last weight absorbs rounding so a left-to-right sum is exactly 1.
        let head: f64 = atoms[..count - 1].iter().map(|a| a.weight).sum();
        atoms[count - 1].weight = 1.0 - head;
        atoms
    }

    /// Image of the measure under `x -> scale * x + shift`, `scale != 0`.
    pub fn affine_image(&self, scale: f64, shift: f64) -> Result<Measure1D> {
        if scale == 0.0 || !scale.is_finite() || !shift.is_finite() {
            return Err(Error::InvalidMeasure(format!("bad affine map scale={scale} shift={shift}")));
        }
        if scale > 0.0 {
            let xs = self.xs.iter().map(|x| scale * x + shift).collect();
            Measure1D::from_cdf_knots(xs, self.fs.clone())
        } else {
            let xs = self.xs.iter().rev().map(|x| scale * x + shift).collect();
            let fs = self.fs.iter().rev().map(|f| 1.0 - f).collect();
            Measure1D::from_cdf_knots(xs, fs)
        }
    }

    /// CDF segment `(F_0, F_1, x_0, x_1)` carrying level `p`, with `F_0 < F_1`.
    pub(crate) fn segment_at(&self, p: f64) -> (f64, f64, f64, f64) {
        let n = self.fs.len();
        let mut k = self.fs.partition_point(|&f| f < p).clamp(1, n - 1);
        while k + 1 < n && self.fs[k] <= self.fs[k - 1] {
            k += 1;
        }
        (self.fs[k - 1], self.fs[k], self.xs[k - 1], self.xs[k])
    }

    /// Linear pieces of the quantile function over `[p0, p1]`, skipping the
    /// jumps that flat CDF stretches produce.
    pub(crate) fn quantile_pieces(&self, p0: f64, p1: f64) -> Vec<QuantilePiece> {
        let mut pieces = Vec::new();
        if p1 <= p0 {
            return pieces;
        }
        let start = self.fs.partition_point(|&f| f <= p0).max(1);
        for k in start..self.fs.len() {
            let (f0, f1) = (self.fs[k - 1], self.fs[k]);
            if f0 >= p1 {
                break;
            }
            if f1 <= f0 {
                continue;
            }
            let a = p0.max(f0);
            let b = p1.min(f1);
            if b <= a {
                continue;
            }
            let (x0, x1) = (self.xs[k - 1], self.xs[k]);
            let at = |p: f64| x0 + (x1 - x0) * (p - f0) / (f1 - f0);
            pieces.push(QuantilePiece { p0: a, p1: b, x0: at(a), x1: at(b) });
        }
        pieces
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unif(lo: f64, hi: f64) -> Measure1D {
        build_measure(&MeasureSpec::uniform(lo, hi)).unwrap()
    }

    #[test]
    fn uniform_knots_are_identity_cdf() {
        let m = unif(0.0, 1.0);
        assert_eq!(m.knots().collect::<Vec<_>>(), vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn piecewise_constant_two_on_half_interval() {
        let m = build_measure(&MeasureSpec::PiecewiseDensity {
            breaks: vec![0.0, 0.5],
            densities: vec![2.0],
        })
        .unwrap();
        assert_eq!(m.support(), (0.0, 0.5));
        assert_eq!(m.cdf(0.5), 1.0);
        assert_abs_diff_eq!(m.cdf(0.25), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.quantile(0.5), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_truncation_support() {
        let m = build_measure(&MeasureSpec::Gaussian { mean: 0.0, sd: 1.0, eps_trunc: Some(1e-9) })
            .unwrap();
        let (lo, hi) = m.support();
        // scipy.stats.norm.ppf(1e-9) = -5.9978070150076865
        assert_abs_diff_eq!(lo, -5.9978070150076865, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 5.9978070150076865, epsilon = 1e-6);
        assert_eq!(m.cdf(hi), 1.0);
        assert_abs_diff_eq!(m.mean(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.cdf(0.0), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn gaussian_rejects_large_truncation() {
        let spec = MeasureSpec::Gaussian { mean: 0.0, sd: 1.0, eps_trunc: Some(1e-3) };
        assert!(build_measure(&spec).is_err());
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(unif(0.0, 1.0).cdf(0.5), 0.5);
        assert_eq!(unif(0.0, 1.0).cdf(-1.0), 0.0);
        assert_abs_diff_eq!(unif(0.0, 2.0).cdf(2.0 / 3.0), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(unif(0.0, 1.0).quantile(0.25), 0.25);
        assert_eq!(unif(0.0, 2.0).quantile(0.5), 1.0);
    }

    #[test]
    fn quantile_on_flat_stretch() {
        let m = build_measure(&MeasureSpec::PiecewiseDensity {
            breaks: vec![0.0, 1.0, 2.0, 3.0],
            densities: vec![1.0, 0.0, 1.0],
        })
        .unwrap();
        assert_eq!(m.quantile(0.5), 1.0);
        assert_eq!(m.quantile_upper(0.5), 2.0);
        assert_abs_diff_eq!(m.quantile(0.75), 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.quantile_upper(0.75), 2.5, epsilon = 1e-15);
    }

    #[test]
    fn partial_moment_examples() {
        let m = unif(0.0, 1.0);
        // ∫_0^{1/2} x dx = 1/8
        assert_abs_diff_eq!(m.partial_first_moment(0.0, 0.5), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(
            m.partial_first_moment(f64::NEG_INFINITY, f64::INFINITY),
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(m.partial_first_moment(0.3, 0.3), 0.0);
    }

    #[test]
    fn discretize_examples() {
        let pos = |m: &Measure1D, n| m.discretize(n).iter().map(|a| a.position).collect::<Vec<_>>();
        assert_eq!(pos(&unif(0.0, 1.0), 2), vec![0.25, 0.75]);
        assert_eq!(pos(&unif(0.0, 1.0), 4), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(pos(&unif(0.0, 2.0), 2), vec![0.5, 1.5]);
        assert!(unif(0.0, 1.0).discretize(2).iter().all(|a| a.weight == 0.5));
    }

    #[test]
    fn discretize_weights_sum_to_one_exactly() {
        for count in [1, 3, 7, 300, 1999] {
            let total: f64 = unif(0.0, 1.0).discretize(count).iter().map(|a| a.weight).sum();
            assert_eq!(total, 1.0, "count {count}");
        }
    }

    #[test]
    fn empirical_interpolates_order_statistics() {
        let m = Measure1D::from_samples(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.knots().collect::<Vec<_>>(), vec![(1.0, 0.0), (2.0, 0.5), (3.0, 1.0)]);
        assert!(matches!(
            Measure1D::from_samples(&[1.0, 1.0]),
            Err(Error::TooFewSamples(1))
        ));
    }

    #[test]
    fn empirical_ties_share_a_knot() {
        let m = Measure1D::from_samples(&[0.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.knots().collect::<Vec<_>>(), vec![(0.0, 0.0), (1.0, 0.5), (2.0, 1.0)]);
    }

    #[test]
    fn empirical_from_file() {
        let dir = std::env::temp_dir().join(format!("minaffine-samples-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.txt");
        std::fs::write(&path, "0.5\n\n0.0\n1.0\n").unwrap();
        let m = build_measure(&MeasureSpec::Empirical { path: Some(path), samples: None }).unwrap();
        assert_eq!(m.support(), (0.0, 1.0));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn rejects_atoms_and_bad_densities() {
        assert!(matches!(build_measure(&MeasureSpec::uniform(1.0, 1.0)), Err(Error::Atom(_))));
        assert!(matches!(
            Measure1D::from_cdf_knots(vec![0.0, 0.0, 1.0], vec![0.0, 0.5, 1.0]),
            Err(Error::Atom(_))
        ));
        let zero = MeasureSpec::PiecewiseDensity { breaks: vec![0.0, 1.0], densities: vec![0.0] };
        assert!(matches!(build_measure(&zero), Err(Error::NotNormalizable(_))));
        let negative =
            MeasureSpec::PiecewiseDensity { breaks: vec![0.0, 1.0, 2.0], densities: vec![1.0, -1.0] };
        assert!(matches!(build_measure(&negative), Err(Error::NotNormalizable(_))));
    }

    #[test]
    fn triangular_matches_closed_form() {
        let m = build_measure(&MeasureSpec::Triangular { lo: 0.0, mode: 0.25, hi: 1.0 }).unwrap();
        assert_abs_diff_eq!(m.cdf(0.25), 0.25, epsilon = 1e-12);
        // mean of triangular(0, 0.25, 1) is (0 + 0.25 + 1) / 3
        assert_abs_diff_eq!(m.mean(), 1.25 / 3.0, epsilon = 1e-5);
    }

    #[test]
    fn reflection_mirrors_cdf() {
        let m = build_measure(&MeasureSpec::PiecewiseDensity {
            breaks: vec![0.0, 1.0, 3.0],
            densities: vec![1.0, 0.25],
        })
        .unwrap();
        let r = m.affine_image(-1.0, 0.0).unwrap();
        for x in [0.2, 0.9, 1.5, 2.7] {
            assert_abs_diff_eq!(r.cdf(-x), 1.0 - m.cdf(x), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(r.mean(), -m.mean(), epsilon = 1e-15);
    }

    #[test]
    fn quantile_pieces_skip_gaps() {
        let m = build_measure(&MeasureSpec::PiecewiseDensity {
            breaks: vec![0.0, 1.0, 2.0, 3.0],
            densities: vec![1.0, 0.0, 1.0],
        })
        .unwrap();
        let pieces = m.quantile_pieces(0.25, 0.75);
        assert_eq!(pieces.len(), 2);
        assert_eq!((pieces[0].x0, pieces[0].x1), (0.5, 1.0));
        assert_eq!((pieces[1].x0, pieces[1].x1), (2.0, 2.5));
    }
}
