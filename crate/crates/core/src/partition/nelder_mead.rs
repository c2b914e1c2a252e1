/// Downhill simplex minimizer (reflection, expansion, contraction, shrink).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    pub max_evaluations: usize,
    /// Stop once the value spread falls below `ftol * (1 + |f_best|)` ...
    pub ftol: f64,
    /// ... and every vertex is within `xtol` of the best one.
    pub xtol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { initial_step: 0.1, max_evaluations: 2000, ftol: 1e-15, xtol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    /// Minimizes `f` from `x0`. Initial edges step toward the unit box
    /// interior so bounded objectives do not start on a flat face.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let d = x0.len();
        let mut evaluations = 0;
        let mut eval = |x: &[f64], evaluations: &mut usize| {
            *evaluations += 1;
            f(x)
        };
        if d == 0 {
            let value = eval(x0, &mut evaluations);
            return Minimum { x: Vec::new(), value, evaluations };
        }

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        simplex.push((x0.to_vec(), eval(x0, &mut evaluations)));
        for i in 0..d {
            let mut x = x0.to_vec();
            x[i] += if x[i] + self.initial_step <= 1.0 { self.initial_step } else { -self.initial_step };
            let v = eval(&x, &mut evaluations);
            simplex.push((x, v));
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[d].1;
            let spread = (worst - best).abs();
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if (spread <= self.ftol * (1.0 + best.abs()) && diameter <= self.xtol)
                || diameter <= 1e-3 * self.xtol
                || evaluations >= self.max_evaluations
            {
                break;
            }

            let mut centroid = vec![0.0; d];
            for (x, _) in &simplex[..d] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / d as f64;
                }
            }
            let along = |t: f64, from: &[f64]| -> Vec<f64> {
                centroid.iter().zip(from).map(|(c, w)| c + t * (c - w)).collect()
            };
            let worst_x = simplex[d].0.clone();

            let xr = along(REFLECT, &worst_x);
            let fr = eval(&xr, &mut evaluations);
            if fr < best {
                let xe = along(EXPAND, &worst_x);
                let fe = eval(&xe, &mut evaluations);
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[d - 1].1 {
                simplex[d] = (xr, fr);
                continue;
            }
            let (xc, fc, accept) = if fr < worst {
                let xc = along(CONTRACT * REFLECT, &worst_x);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc, fc <= fr)
            } else {
                let xc = along(-CONTRACT, &worst_x);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc, fc < worst)
            };
            if accept {
                simplex[d] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> =
                    anchor.iter().zip(&vertex.0).map(|(a, v)| a + SHRINK * (v - a)).collect();
                let v = eval(&x, &mut evaluations);
                *vertex = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, evaluations }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_bowl() {
        let nm = NelderMead::default();
        let m = nm.minimize(|x| (x[0] - 0.3).powi(2) + 2.0 * (x[1] - 0.7).powi(2), &[0.5, 0.5]);
        assert_abs_diff_eq!(m.x[0], 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(m.x[1], 0.7, epsilon = 1e-6);
        assert!(m.value < 1e-12);
    }

    #[test]
    fn rosenbrock() {
        let nm = NelderMead { max_evaluations: 20_000, ..NelderMead::default() };
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert_abs_diff_eq!(m.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(m.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn one_dimensional_kink() {
        let nm = NelderMead::default();
        let m = nm.minimize(|x| (x[0] - 0.25).abs(), &[0.9]);
        assert_abs_diff_eq!(m.x[0], 0.25, epsilon = 1e-9);
    }

    #[test]
    fn zero_dimensional() {
        let m = NelderMead::default().minimize(|_| 4.0, &[]);
        assert_eq!((m.value, m.evaluations), (4.0, 1));
    }
}
