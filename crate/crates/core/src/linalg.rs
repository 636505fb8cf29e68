//! Minimal dense linear algebra for the small symmetric systems that show up
//! in the regression families (k stays far below 32).

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    /// X' X of this matrix (cols x cols, symmetric).
    pub fn gram(&self) -> Matrix {
        let k = self.cols;
        let mut g = Matrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let mut s = 0.0;
                for i in 0..self.rows {
                    s += self.at(i, a) * self.at(i, b);
                }
                *g.at_mut(a, b) = s;
                *g.at_mut(b, a) = s;
            }
        }
        g
    }

    /// X' v for a column vector v of length `rows`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self.at(i, j) * v[i];
            }
        }
        out
    }

    /// X v for a vector v of length `cols`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self.at(i, j) * v[j];
            }
            out[i] = s;
        }
        out
    }
}

/// Cholesky factor L (lower) of a symmetric positive definite matrix.
/// Fails with a domain error when a pivot is not strictly positive, which is
/// how rank deficiency surfaces for the submodel designs.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    let n = m.rows;
    if m.cols != n {
        return Err(Error::domain("cholesky: matrix not square"));
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.at(i, j);
            for t in 0..j {
                s -= l.at(i, t) * l.at(j, t);
            }
            if i == j {
                // Relative pivot threshold guards against duplicate columns.
                let scale = m.at(i, i).abs().max(1.0);
                if s <= scale * 1e-12 {
                    return Err(Error::domain(format!(
                        "cholesky: non-positive pivot at {i} (singular or not SPD)"
                    )));
                }
                *l.at_mut(i, j) = s.sqrt();
            } else {
                *l.at_mut(i, j) = s / l.at(j, j);
            }
        }
    }
    Ok(l)
}

/// Solve A x = b for SPD A given its Cholesky factor.
pub fn chol_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l.at(i, j) * y[j];
        }
        y[i] = s / l.at(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= l.at(j, i) * x[j];
        }
        x[i] = s / l.at(i, i);
    }
    x
}

/// Inverse of an SPD matrix via its Cholesky factor.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    let l = cholesky(m)?;
    let n = m.rows;
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = chol_solve(&l, &e);
        for i in 0..n {
            *inv.at_mut(i, j) = col[i];
        }
    }
    Ok(inv)
}

/// v' M v.
pub fn quad_form(m: &Matrix, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..m.rows {
        for j in 0..m.cols {
            s += v[i] * m.at(i, j) * v[j];
        }
    }
    s
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
