//! Dense row-major matrices and Cholesky factorization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
    /// Ridge added to the diagonal before factorization succeeded.
    pub jitter: f64,
}

impl Cholesky {
    /// Plain factorization; `None` if `a` is not numerically positive definite.
    pub fn factor(a: &Matrix) -> Option<Self> {
        Self::factor_shifted(a, 0.0)
    }

    fn factor_shifted(a: &Matrix, shift: f64) -> Option<Self> {
        assert_eq!(a.rows, a.cols, "cholesky of non-square matrix");
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)] + shift;
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(Self { l, jitter: shift })
    }

    /// Tries the exact matrix, then adds `base · 10^k · max(1, max diag)` to the
    /// diagonal for k = 0, 1, ... until factorization succeeds or `max_steps`
    /// escalations have failed.
    pub fn factor_with_jitter(a: &Matrix, base: f64, max_steps: usize) -> Result<Self> {
        if let Some(c) = Self::factor(a) {
            return Ok(c);
        }
        let scale = a.diagonal().into_iter().fold(1.0_f64, |m, d| m.max(d.abs()));
        let mut shift = base * scale;
        for _ in 0..max_steps {
            if let Some(c) = Self::factor_shifted(a, shift) {
                log::debug!("cholesky needed jitter {shift:e}");
                return Ok(c);
            }
            shift *= 10.0;
        }
        Err(Error::IllConditioned(format!(
            "matrix of order {} not positive definite after jitter {:e}",
            a.rows,
            shift / 10.0
        )))
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[(k, i)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        // symmetrize against rounding
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd() -> Matrix {
        Matrix {
            rows: 3,
            cols: 3,
            data: vec![4.0, 12.0, -16.0, 12.0, 37.0, -43.0, -16.0, -43.0, 98.0],
        }
    }

    #[test]
    fn factor_known_matrix() {
        let c = Cholesky::factor(&spd()).unwrap();
        assert_eq!(c.l.data, vec![2.0, 0.0, 0.0, 6.0, 1.0, 0.0, -8.0, 5.0, 3.0]);
        let x = c.solve(&[1.0, 2.0, 3.0]);
        let back = spd().mul_vec(&x);
        for (a, b) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = spd();
        let inv = Cholesky::factor(&a).unwrap().inverse();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[(i, k)] * inv[(k, j)]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn singular_needs_jitter_and_indefinite_fails() {
        let singular = Matrix {
            rows: 2,
            cols: 2,
            data: vec![1.0, 1.0, 1.0, 1.0],
        };
        assert!(Cholesky::factor(&singular).is_none());
        let c = Cholesky::factor_with_jitter(&singular, 1e-10, 10).unwrap();
        assert!(c.jitter > 0.0);

        let indefinite = Matrix {
            rows: 2,
            cols: 2,
            data: vec![1.0, 0.0, 0.0, -5.0],
        };
        assert!(matches!(
            Cholesky::factor_with_jitter(&indefinite, 1e-10, 5),
            Err(Error::IllConditioned(_))
        ));
    }
}
