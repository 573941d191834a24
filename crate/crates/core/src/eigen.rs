//! Principal component analysis of normalised residual frames.

use rayon::prelude::*;

use crate::linalg::{jacobi_eigen, SquareMatrix};
use crate::signal::dot;
use crate::{Error, Result};

/// Eigenvectors kept in a trained basis.
pub const MAX_STORED_COMPONENTS: usize = 64;
/// Relative off-diagonal mass at which the Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaOptions {
    /// Subtract the mean before the decomposition (and add it back at reconstruction).
    pub center: bool,
    pub max_components: usize,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self {
            center: true,
            max_components: MAX_STORED_COMPONENTS,
        }
    }
}

/// Mean, leading eigenvectors and the full eigenvalue spectrum of the frame covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    /// All zeros for an uncentred basis.
    pub mean: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// Every eigenvalue of the covariance, descending; only the first
    /// `eigenvectors.len()` have stored vectors.
    pub eigenvalues: Vec<f64>,
    pub training_frame_count: usize,
    pub centered: bool,
    /// Training mean of the first weight, used when synthesising without weights.
    pub implicit_first_weight: f64,
}

impl EigenBasis {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn component_count(&self) -> usize {
        self.eigenvectors.len()
    }

    pub fn total_dispersion(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Weights of `frame - mean` on the first `k` eigenvectors.
    pub fn project(&self, frame: &[f64], k: usize) -> Result<Vec<f64>> {
        if frame.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: frame.len(),
            });
        }
        if k > self.component_count() {
            return Err(Error::DimensionMismatch {
                expected: self.component_count(),
                found: k,
            });
        }
        let centered: Vec<f64> = frame.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(self.eigenvectors[..k].iter().map(|v| dot(&centered, v)).collect())
    }

    /// `mean + sum_i w_i v_i`.
    pub fn reconstruct(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() > self.component_count() {
            return Err(Error::DimensionMismatch {
                expected: self.component_count(),
                found: weights.len(),
            });
        }
        let mut out = self.mean.clone();
        for (w, v) in weights.iter().zip(&self.eigenvectors) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        Ok(out)
    }

    /// Share of the total dispersion carried by the first eigenvector.
    pub fn first_share(&self) -> f64 {
        let total = self.total_dispersion();
        if total == 0.0 {
            return 0.0;
        }
        self.eigenvalues.first().copied().unwrap_or(0.0) / total
    }
}

pub fn fit_pca(frames: &[Vec<f64>], options: &PcaOptions) -> Result<EigenBasis> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames(frames.len()));
    }
    let dim = frames[0].len();
    if let Some(bad) = frames.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let n = frames.len() as f64;

    let mut mean = vec![0.0; dim];
    if options.center {
        for f in frames {
            for (m, x) in mean.iter_mut().zip(f) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
    }

    // fixed chunking keeps the floating-point summation order reproducible
    let partials: Vec<Vec<f64>> = frames
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; dim * dim];
            let mut centered = vec![0.0; dim];
            for f in chunk {
                for ((c, x), m) in centered.iter_mut().zip(f).zip(&mean) {
                    *c = x - m;
                }
                for i in 0..dim {
                    let ci = centered[i];
                    let row = &mut acc[i * dim..];
                    for j in i..dim {
                        row[j] += ci * centered[j];
                    }
                }
            }
            acc
        })
        .collect();
    let mut cov = SquareMatrix::zeros(dim);
    for p in &partials {
        for (c, v) in cov.as_mut_slice().iter_mut().zip(p) {
            *c += v;
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov.get(i, j) / n;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    let eig = jacobi_eigen(cov, JACOBI_TOLERANCE, MAX_SWEEPS);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]));
    let largest = eig.values[order[0]].max(0.0);
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = eig.values[i];
            if v <= largest * 1e-13 {
                0.0
            } else {
                v
            }
        })
        .collect();

    let keep = dim.min(frames.len()).min(options.max_components);
    let eigenvectors: Vec<Vec<f64>> = order[..keep]
        .iter()
        .map(|&i| {
            let mut v = eig.vectors[i].clone();
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();

    let implicit_first_weight = match eigenvectors.first() {
        Some(v1) => {
            frames
                .iter()
                .map(|f| f.iter().zip(&mean).zip(v1).map(|((x, m), v)| (x - m) * v).sum::<f64>())
                .sum::<f64>()
                / n
        }
        None => 0.0,
    };

    Ok(EigenBasis {
        mean,
        eigenvectors,
        eigenvalues,
        training_frame_count: frames.len(),
        centered: options.center,
        implicit_first_weight,
    })
}

/// `cumulative_fraction[k - 1]` is the share of dispersion covered by the first `k` eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionCurve {
    pub cumulative_fraction: Vec<f64>,
}

pub fn dispersion(basis: &EigenBasis) -> DispersionCurve {
    let total = basis.total_dispersion();
    if total == 0.0 {
        return DispersionCurve {
            cumulative_fraction: vec![1.0; basis.eigenvalues.len()],
        };
    }
    let mut acc = 0.0;
    DispersionCurve {
        cumulative_fraction: basis
            .eigenvalues
            .iter()
            .map(|v| {
                acc += v;
                (acc / total).min(1.0)
            })
            .collect(),
    }
}

/// Smallest `k` whose cumulative fraction reaches `coverage`.
pub fn select_components(curve: &DispersionCurve, coverage: f64) -> Result<usize> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::config(format!("coverage {coverage} outside (0, 1]")));
    }
    let k = curve
        .cumulative_fraction
        .iter()
        .position(|&c| c >= coverage - 1e-12)
        .map_or(curve.cumulative_fraction.len(), |i| i + 1);
    Ok(k)
}
