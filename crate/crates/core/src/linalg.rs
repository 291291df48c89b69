//! Small dense LU factorization with a 1-norm condition estimate.

use nalgebra::DMatrix;

/// `P A = L U` with partial (row) pivoting. `L` has a unit diagonal and is
/// stored below the diagonal of `lu`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
    swaps: usize,
    singular: bool,
}

impl Lu {
    pub fn new(a: &DMatrix<f64>) -> Self {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut singular = false;
        for k in 0..n {
            let (pivot_row, pivot_abs) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 || !pivot_abs.is_finite() {
                singular = true;
                continue;
            }
            if pivot_row != k {
                lu.swap_rows(k, pivot_row);
                perm.swap(k, pivot_row);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    lu[(i, j)] -= factor * lu[(k, j)];
                }
            }
        }
        Self { lu, perm, swaps, singular }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// True when a pivot was exactly zero.
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn determinant(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        let sign = if self.swaps.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * self.lu.diagonal().iter().product::<f64>()
    }

    /// Solves `A x = b`. Returns `None` for an exactly singular factorization.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        if self.singular {
            return None;
        }
        let n = self.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        Some(x)
    }

    /// Solves `A^T y = c`.
    pub fn solve_transpose(&self, c: &[f64]) -> Option<Vec<f64>> {
        if self.singular {
            return None;
        }
        let n = self.dim();
        let mut z = c.to_vec();
        // U^T w = c
        for i in 0..n {
            for j in 0..i {
                z[i] -= self.lu[(j, i)] * z[j];
            }
            z[i] /= self.lu[(i, i)];
        }
        // L^T z = w
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                z[i] -= self.lu[(j, i)] * z[j];
            }
        }
        let mut y = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            y[p] = z[i];
        }
        Some(y)
    }

    /// Hager-Higham estimate of `||A^-1||_1`; infinite when singular.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        if self.singular {
            return f64::INFINITY;
        }
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0;
        let mut last_index = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x).unwrap();
            estimate = norm1(&y);
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi).unwrap();
            let (j, zmax) = z.iter().enumerate().map(|(i, v)| (i, v.abs())).fold((0, -1.0), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_index {
                break;
            }
            last_index = j;
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        // alternating-sign probe catches cases the power-like iteration misses
        let probe: Vec<f64> = (0..n)
            .map(|i| {
                let mag = if n > 1 { 1.0 + i as f64 / (n - 1) as f64 } else { 1.0 };
                if i % 2 == 0 {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let alt = 2.0 * norm1(&self.solve(&probe).unwrap()) / (3.0 * n as f64);
        estimate.max(alt)
    }
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn matrix_norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Estimated 1-norm condition number `||A||_1 * ||A^-1||_1`.
pub fn condition_estimate(a: &DMatrix<f64>, lu: &Lu) -> f64 {
    matrix_norm1(a) * lu.inverse_norm1_estimate()
}

/// Spectral norm of the inverse, `1 / sigma_min`.
pub fn inverse_spectral_norm(a: &DMatrix<f64>) -> f64 {
    let sigma_min = a.singular_values().iter().cloned().fold(f64::INFINITY, f64::min);
    if sigma_min == 0.0 {
        f64::INFINITY
    } else {
        1.0 / sigma_min
    }
}
