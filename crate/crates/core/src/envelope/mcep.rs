//! Mel-cepstral estimation by Newton minimisation of the unbiased
//! log-spectral criterion on a warped frequency grid.
//!
//! With `log|H(w)| = sum_m c_m cos(m * beta(w))`, the criterion is
//! `E(c) = mean_w [exp(R) - R - 1]`, `R = log I(w) - 2 log|H(w)|`. It is convex
//! in `c`; its Hessian is Toeplitz-plus-Hankel in the moments
//! `r_n = mean_w [exp(R) cos(n beta)]`.

use crate::linalg::{cholesky_solve, SquareMatrix};

pub const MAX_ITERATIONS: usize = 30;
pub const RELATIVE_TOLERANCE: f64 = 1e-6;

/// Frequency warping of the first-order all-pass with coefficient `alpha`.
pub fn warp(omega: f64, alpha: f64) -> f64 {
    omega + 2.0 * (alpha * omega.sin() / (1.0 - alpha * omega.cos())).atan()
}

/// `cos(n * beta(w_k))` for `n = 0..=2 * order` on the `bins` uniform points of `[0, pi]`,
/// plus trapezoid weights that average over the full circle.
#[derive(Debug, Clone)]
pub struct WarpedGrid {
    order: usize,
    cos: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl WarpedGrid {
    pub fn new(bins: usize, order: usize, alpha: f64) -> Self {
        assert!(bins >= 2);
        let intervals = (bins - 1) as f64;
        let beta: Vec<f64> = (0..bins)
            .map(|k| warp(std::f64::consts::PI * k as f64 / intervals, alpha))
            .collect();
        let cos = (0..=2 * order)
            .map(|n| beta.iter().map(|b| (n as f64 * b).cos()).collect())
            .collect();
        let mut weights = vec![1.0 / intervals; bins];
        weights[0] *= 0.5;
        weights[bins - 1] *= 0.5;
        Self {
            order,
            cos,
            weights,
        }
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    fn moments(&self, f: &[f64], upto: usize) -> Vec<f64> {
        (0..=upto)
            .map(|n| {
                self.cos[n]
                    .iter()
                    .zip(f)
                    .zip(&self.weights)
                    .map(|((c, v), w)| c * v * w)
                    .sum()
            })
            .collect()
    }

    /// `2 log|H|` on the grid for coefficients `c`.
    fn log_power(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.bins()];
        for (m, cm) in c.iter().enumerate() {
            for (o, cs) in out.iter_mut().zip(&self.cos[m]) {
                *o += 2.0 * cm * cs;
            }
        }
        out
    }

    /// Toeplitz-plus-Hankel matrix `[r_|i-j| + r_(i+j)]`.
    fn toeplitz_hankel(&self, r: &[f64]) -> SquareMatrix {
        SquareMatrix::from_fn(self.order + 1, |i, j| r[i.abs_diff(j)] + r[i + j])
    }
}

#[derive(Debug, Clone)]
pub struct McepFit {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub criterion: f64,
}

/// Fits mel-cepstral coefficients `c_0..c_order` to a log periodogram sampled on the grid.
pub fn fit(grid: &WarpedGrid, log_periodogram: &[f64]) -> McepFit {
    let m = grid.order;
    let q = grid.moments(&vec![1.0; grid.bins()], 2 * m);

    // least-squares fit of the log spectrum as the starting point
    let p = grid.moments(log_periodogram, m);
    let a = grid.toeplitz_hankel(&q);
    let mut c = cholesky_solve(&a, &p).unwrap_or_else(|| {
        let mut c = vec![0.0; m + 1];
        c[0] = p[0] / 2.0;
        c
    });

    let criterion = |c: &[f64]| -> (f64, Vec<f64>) {
        let lp = grid.log_power(c);
        let mut e = 0.0;
        let mut ratio = vec![0.0; lp.len()];
        for k in 0..lp.len() {
            let r = log_periodogram[k] - lp[k];
            let x = r.exp();
            ratio[k] = x;
            e += grid.weights[k] * (x - r - 1.0);
        }
        (e, ratio)
    };

    let (mut e, mut ratio) = criterion(&c);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let r = grid.moments(&ratio, 2 * m);
        let mut hess = grid.toeplitz_hankel(&r);
        for v in hess.as_mut_slice() {
            *v *= 2.0;
        }
        let neg_grad: Vec<f64> = (0..=m).map(|i| 2.0 * (r[i] - q[i])).collect();
        let Some(step) = cholesky_solve(&hess, &neg_grad) else {
            break;
        };

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = c.iter().zip(&step).map(|(a, d)| a + scale * d).collect();
            let (et, rt) = criterion(&trial);
            if et.is_finite() && et <= e {
                accepted = Some((trial, et, rt));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, et, rt)) = accepted else {
            // no descent possible: already at the minimum to working precision
            converged = true;
            break;
        };
        let change = (e - et).abs() / et.abs().max(f64::MIN_POSITIVE);
        c = trial;
        e = et;
        ratio = rt;
        if change < RELATIVE_TOLERANCE {
            converged = true;
            break;
        }
    }
    McepFit {
        coefficients: c,
        iterations,
        converged,
        criterion: e,
    }
}

/// Mel-cepstrum to MLSA filter coefficients.
pub fn mc2b(c: &[f64], alpha: f64) -> Vec<f64> {
    let mut b = c.to_vec();
    for i in (0..b.len().saturating_sub(1)).rev() {
        b[i] = c[i] - alpha * b[i + 1];
    }
    b
}

/// Inverse of [`mc2b`].
pub fn b2mc(b: &[f64], alpha: f64) -> Vec<f64> {
    let mut c = b.to_vec();
    for i in 0..b.len().saturating_sub(1) {
        c[i] = b[i] + alpha * b[i + 1];
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mc2b_inverts() {
        let c = [0.3, -1.2, 0.5, 0.25, -0.1];
        let b = mc2b(&c, 0.42);
        let back = b2mc(&b, 0.42);
        for (x, y) in c.iter().zip(&back) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(b[4], c[4]);
    }

    #[test]
    fn warp_fixes_endpoints() {
        assert!(warp(0.0, 0.42).abs() < 1e-15);
        assert!((warp(std::f64::consts::PI, 0.42) - std::f64::consts::PI).abs() < 1e-12);
        assert!(warp(0.5, 0.42) > 0.5);
    }

    #[test]
    fn recovers_a_smooth_log_spectrum() {
        // a log spectrum that is exactly representable: the fit's fixed point satisfies
        // mean(exp(R)) = 1 and the moments of exp(R) vanish, so R = 0 is the optimum
        let grid = WarpedGrid::new(257, 8, 0.42);
        let truth = [0.5, 0.8, -0.3, 0.2, 0.05, -0.02, 0.01, 0.0, 0.0];
        let lp = grid.log_power(&truth);
        let fitted = fit(&grid, &lp);
        assert!(fitted.converged);
        for (a, b) in fitted.coefficients.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn criterion_is_not_worse_than_least_squares_start() {
        let grid = WarpedGrid::new(129, 6, 0.42);
        let lp: Vec<f64> = (0..129).map(|k| ((k as f64) * 0.37).sin() * 3.0 - 1.0).collect();
        let fitted = fit(&grid, &lp);
        assert!(fitted.criterion.is_finite());
        assert!(fitted.criterion >= 0.0);
    }
}
