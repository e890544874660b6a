//! Dense row-major `f32` matrices.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A dense row-major matrix of 32-bit floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

/// Bytes needed for a `rows x cols` f32 matrix, or an overflow error.
pub fn matrix_bytes(rows: usize, cols: usize) -> Result<u128> {
    (rows as u128)
        .checked_mul(cols as u128)
        .and_then(|n| n.checked_mul(4))
        .ok_or(Error::Overflow("matrix size"))
}

impl Matrix {
    /// Allocates a zero matrix, surfacing allocation failure as [`Error::Capacity`].
    pub fn try_zeros(rows: usize, cols: usize) -> Result<Self> {
        let len = rows.checked_mul(cols).ok_or(Error::Overflow("matrix size"))?;
        let mut data = Vec::new();
        data.try_reserve_exact(len).map_err(|_| Error::Capacity {
            requested_bytes: len as u128 * 4,
            budget_bytes: 0,
        })?;
        data.resize(len, 0.0);
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::try_zeros(rows, cols).expect("matrix allocation failed")
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix buffer length",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.cols + j] = v;
    }

    pub fn byte_len(&self) -> usize {
        self.data.len() * 4
    }

    /// Applies `max(x, 0)` in place.
    pub fn relu_in_place(&mut self) {
        for v in &mut self.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Concatenates two matrices with equal row counts along the column axis.
    pub fn hconcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                what: "row count for concatenation",
                expected: self.rows,
                found: other.rows,
            });
        }
        let cols = self.cols + other.cols;
        let mut out = Matrix::try_zeros(self.rows, cols)?;
        for i in 0..self.rows {
            let dst = out.row_mut(i);
            dst[..self.cols].copy_from_slice(self.row(i));
            dst[self.cols..].copy_from_slice(other.row(i));
        }
        Ok(out)
    }

    /// Copies the listed rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "inner dimension of matmul",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::try_zeros(self.rows, other.cols)?;
        for i in 0..self.rows {
            let a = self.row(i);
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                axpy(aik, other.row(k), dst);
            }
        }
        Ok(out)
    }

    /// `self * other^T`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                what: "inner dimension of matmul_t",
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut out = Matrix::try_zeros(self.rows, other.rows)?;
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                what: "inner dimension of t_matmul",
                expected: self.rows,
                found: other.rows,
            });
        }
        let mut out = Matrix::try_zeros(self.cols, other.cols)?;
        for k in 0..self.rows {
            let a = self.row(k);
            let b = other.row(k);
            for (i, &aki) in a.iter().enumerate() {
                if aki == 0.0 {
                    continue;
                }
                axpy(aki, b, &mut out.data[i * other.cols..(i + 1) * other.cols]);
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f32 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// `y += a * x`.
#[inline]
pub fn axpy(a: f32, x: &[f32], y: &mut [f32]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Eight independent partial sums so the loop vectorises; the summation
/// order is fixed, so results stay bitwise reproducible.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f32; 8];
    let (ac, bc) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ac.zip(bc) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `dot(w, x[r])` for four vectors at once, sharing each load of `w`.
/// Bitwise equal to four separate [`dot`] calls.
#[inline]
pub fn dot4(w: &[f32], x: [&[f32]; 4]) -> [f32; 4] {
    let n = w.len();
    let [x0, x1, x2, x3] = x.map(|v| &v[..n]);
    let (mut a0, mut a1, mut a2, mut a3) = ([0.0f32; 8], [0.0f32; 8], [0.0f32; 8], [0.0f32; 8]);
    let chunks = w
        .chunks_exact(8)
        .zip(x0.chunks_exact(8))
        .zip(x1.chunks_exact(8))
        .zip(x2.chunks_exact(8))
        .zip(x3.chunks_exact(8));
    for ((((wc, c0), c1), c2), c3) in chunks {
        for l in 0..8 {
            a0[l] += wc[l] * c0[l];
            a1[l] += wc[l] * c1[l];
            a2[l] += wc[l] * c2[l];
            a3[l] += wc[l] * c3[l];
        }
    }
    let body = n - n % 8;
    let fold = |a: [f32; 8], v: &[f32]| {
        let tail: f32 = w[body..].iter().zip(&v[body..]).map(|(p, q)| p * q).sum();
        ((a[0] + a[4]) + (a[1] + a[5])) + ((a[2] + a[6]) + (a[3] + a[7])) + tail
    };
    [fold(a0, x0), fold(a1, x1), fold(a2, x2), fold(a3, x3)]
}

/// `y += W x` for a row-major `W` with `y.len()` rows and `x.len()` columns.
#[inline]
pub fn gemv_acc(w: &Matrix, x: &[f32], y: &mut [f32]) {
    debug_assert_eq!(w.cols(), x.len());
    debug_assert_eq!(w.rows(), y.len());
    for (k, yk) in y.iter_mut().enumerate() {
        *yk += dot(w.row(k), x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dot4_matches_dot_bitwise() {
        for n in [0, 1, 7, 8, 9, 31, 64] {
            let v: Vec<Vec<f32>> = (0..5).map(|r| (0..n).map(|i| ((i * 7 + r * 3) % 11) as f32 * 0.37 - 1.3).collect()).collect();
            let got = dot4(&v[4], [&v[0], &v[1], &v[2], &v[3]]);
            for r in 0..4 {
                assert_eq!(got[r].to_bits(), dot(&v[4], &v[r]).to_bits());
            }
        }
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f32 - 5.0);
        let b = Matrix::from_fn(4, 2, |i, j| (i as f32) * 0.5 - j as f32);
        let ab = a.matmul(&b).unwrap();
        let ab_t = a.matmul_t(&b.transpose()).unwrap();
        let at_b = a.transpose().t_matmul(&b).unwrap();
        assert_eq!(ab.max_abs_diff(&ab_t), 0.0);
        assert_eq!(ab.max_abs_diff(&at_b), 0.0);
        assert_eq!(ab.get(0, 0), -5.0 * 0.0 + -4.0 * 0.5 + -3.0 * 1.0 + -2.0 * 1.5);
    }

    #[test]
    fn dimension_errors() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::DimensionMismatch { .. })));
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(a.hconcat(&Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn hconcat_and_relu() {
        let mut a = Matrix::from_vec(2, 1, vec![-1.0, 2.0]).unwrap();
        a.relu_in_place();
        let c = a.hconcat(&Matrix::from_vec(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap()).unwrap();
        assert_eq!(c.as_slice(), &[0.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
    }
}
