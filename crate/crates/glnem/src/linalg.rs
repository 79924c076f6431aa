//! Small dense linear algebra: a row-major matrix type, Householder QR with a
//! positive-diagonal convention, and a cyclic Jacobi eigensolver for the
//! symmetric low-dimensional problems that show up in post-processing.
//!
//! Everything here targets tall-thin shapes (n up to a few hundred rows,
//! single-digit columns), where simple dense loops are both fast and easy to
//! audit.

use crate::error::{GlnemError, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    /// `selfᵀ * other` without forming the transpose.
    pub fn tr_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "shape mismatch in tr_matmul");
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.at(k, i);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Thin QR factorization `A = Q R` computed by Householder reflections, with
/// signs normalized so every diagonal entry of `R` is positive. For full
/// column rank input this is the unique such factorization.
pub struct ThinQr {
    pub q: Mat,
    pub r: Mat,
}

/// Computes the thin QR of an `n x m` matrix (`n >= m`).
///
/// Fails with a degenerate-input error when a diagonal of `R` underflows
/// relative to the column scale, which signals rank deficiency.
pub fn householder_qr(a: &Mat) -> Result<ThinQr> {
    let n = a.rows();
    let m = a.cols();
    assert!(n >= m, "householder_qr requires rows >= cols");
    let mut work = a.clone();
    // Householder vectors stored per column; beta factors alongside.
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m);
    let scale = a.frobenius_norm().max(1.0);

    for k in 0..m {
        // Build the reflector for column k from rows k..n.
        let mut v: Vec<f64> = (k..n).map(|i| work.at(i, k)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= scale * 1e-13 {
            return Err(GlnemError::Degenerate(format!(
                "rank-deficient matrix in QR at column {k}"
            )));
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2 = v.iter().map(|x| x * x).sum::<f64>();
        let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };

        // Apply to the remaining columns.
        for j in k..m {
            let mut dot = 0.0;
            for (idx, i) in (k..n).enumerate() {
                dot += v[idx] * work.at(i, j);
            }
            dot *= beta;
            for (idx, i) in (k..n).enumerate() {
                *work.at_mut(i, j) -= dot * v[idx];
            }
        }
        vs.push(v);
        betas.push(beta);
    }

    // R is the upper triangle of the worked matrix.
    let mut r = Mat::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            *r.at_mut(i, j) = work.at(i, j);
        }
    }

    // Accumulate Q by applying the reflectors to the first m identity columns
    // in reverse order.
    let mut q = Mat::zeros(n, m);
    for j in 0..m {
        *q.at_mut(j, j) = 1.0;
    }
    for k in (0..m).rev() {
        let v = &vs[k];
        let beta = betas[k];
        for j in 0..m {
            let mut dot = 0.0;
            for (idx, i) in (k..n).enumerate() {
                dot += v[idx] * q.at(i, j);
            }
            dot *= beta;
            for (idx, i) in (k..n).enumerate() {
                *q.at_mut(i, j) -= dot * v[idx];
            }
        }
    }

    // Normalize signs so the diagonal of R is positive.
    for k in 0..m {
        let d = r.at(k, k);
        if d.abs() <= scale * 1e-13 {
            return Err(GlnemError::Degenerate(format!(
                "rank-deficient matrix in QR at column {k}"
            )));
        }
        if d < 0.0 {
            for j in k..m {
                *r.at_mut(k, j) = -r.at(k, j);
            }
            for i in 0..n {
                *q.at_mut(i, k) = -q.at(i, k);
            }
        }
    }

    Ok(ThinQr { q, r })
}

/// Solves `R x = b` for upper-triangular `R` in place.
pub fn solve_upper(r: &Mat, b: &mut [f64]) {
    let m = r.rows();
    assert_eq!(r.cols(), m);
    assert_eq!(b.len(), m);
    for i in (0..m).rev() {
        let mut s = b[i];
        for j in (i + 1)..m {
            s -= r.at(i, j) * b[j];
        }
        b[i] = s / r.at(i, i);
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, V)` with `S = V diag(w) Vᵀ`, eigenvalues sorted in
/// descending order.
pub fn jacobi_eigh(s: &Mat) -> (Vec<f64>, Mat) {
    let n = s.rows();
    assert_eq!(s.cols(), n, "jacobi_eigh expects a square matrix");
    let mut a = s.clone();
    let mut v = Mat::identity(n);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.at(i, j).abs();
            }
        }
        if off < 1e-14 * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.at(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.at(p, p);
                let aqq = a.at(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sgn = t * c;
                for k in 0..n {
                    let akp = a.at(k, p);
                    let akq = a.at(k, q);
                    *a.at_mut(k, p) = c * akp - sgn * akq;
                    *a.at_mut(k, q) = sgn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a.at(p, k);
                    let aqk = a.at(q, k);
                    *a.at_mut(p, k) = c * apk - sgn * aqk;
                    *a.at_mut(q, k) = sgn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    *v.at_mut(k, p) = c * vkp - sgn * vkq;
                    *v.at_mut(k, q) = sgn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.at(i, i)).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let w: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vs = Mat::from_fn(n, n, |i, j| v.at(i, order[j]));
    (w, vs)
}
