//! Small dense linear algebra: symmetric eigendecomposition and SPD solves.

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    fn off_diagonal_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s
    }
}

/// Eigenpairs of a symmetric matrix, unsorted.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the eigenvector of `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigendecomposition.
///
/// Iterates until the off-diagonal Frobenius mass falls below `tol` relative
/// to the full Frobenius norm.
pub fn jacobi_eigen(mut a: SquareMatrix, tol: f64, max_sweeps: usize) -> SymmetricEigen {
    let n = a.dim();
    let mut v = SquareMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 });
    let total = a.frobenius_sq();
    let mut sweeps = 0;
    if total > 0.0 {
        let threshold = tol * tol * total;
        while sweeps < max_sweeps && a.off_diagonal_sq() > threshold {
            sweeps += 1;
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let tau = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    rotate(&mut a, &mut v, p, q, c, s);
                }
            }
        }
    }
    let values = (0..n).map(|i| a.get(i, i)).collect();
    let vectors = (0..n).map(|k| (0..n).map(|i| v.get(i, k)).collect()).collect();
    SymmetricEigen {
        values,
        vectors,
        sweeps,
    }
}

fn rotate(a: &mut SquareMatrix, v: &mut SquareMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.dim();
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
/// Returns `None` if `A` is not numerically positive definite.
pub fn cholesky_solve(a: &SquareMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.dim();
    let mut l = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l.set(i, i, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * y[k];
        }
        y[i] = sum / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    Some(x)
}
