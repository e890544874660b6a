//! Principal component analysis on standardised features.
//!
//! The covariance matrix is formed explicitly in `f64`; its leading
//! eigenvectors come from randomised block subspace iteration followed by a
//! Rayleigh-Ritz step solved with cyclic Jacobi rotations. With
//! `oversample + k >= d` the subspace is the full space and the result is an
//! exact eigendecomposition up to Jacobi's convergence threshold
//! (off-diagonal mass below `1e-22` of the total).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

/// Fitted normalisation + projection.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
    /// `d_in x k`, row-major, orthonormal columns.
    pub components: Vec<f64>,
    pub input_dim: usize,
    pub k: usize,
    /// Variance captured by each component, descending.
    pub explained_variance: Vec<f64>,
    /// Sum of the variances of all normalised input dimensions.
    pub total_variance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PcaParams {
    pub oversample: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for PcaParams {
    fn default() -> Self {
        Self { oversample: 10, power_iterations: 4, seed: 0x5EED }
    }
}

pub fn fit_pca(x: &Matrix, k: usize) -> Result<PcaModel> {
    fit_pca_with(x, k, &PcaParams::default())
}

pub fn fit_pca_with(x: &Matrix, k: usize, params: &PcaParams) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if k == 0 {
        return Err(invalid("PCA needs at least one component"));
    }
    if k > d {
        return Err(invalid(alloc::format!("cannot extract {k} components from {d} dimensions")));
    }
    if n < k {
        return Err(invalid(alloc::format!("PCA with {k} components needs at least {k} rows, got {n}")));
    }

    let mut mean = vec![0.0f64; d];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(x.row(i)) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0f64; d];
    for i in 0..n {
        for ((s, &v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v as f64 - m) * (v as f64 - m);
        }
    }
    let inv_std: Vec<f64> = var
        .iter()
        .map(|s| {
            let sd = libm::sqrt(s / n as f64);
            if sd > 1e-12 { 1.0 / sd } else { 1.0 }
        })
        .collect();

    // Covariance of the normalised data (upper triangle, then mirrored).
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut cov = vec![0.0f64; d * d];
    let mut z = vec![0.0f64; d];
    for i in 0..n {
        for ((zv, &v), (m, s)) in z.iter_mut().zip(x.row(i)).zip(mean.iter().zip(&inv_std)) {
            *zv = (v as f64 - m) * s;
        }
        for a in 0..d {
            let za = z[a];
            if za == 0.0 {
                continue;
            }
            let row = &mut cov[a * d..(a + 1) * d];
            for b in a..d {
                row[b] += za * z[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / denom;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    let total_variance = (0..d).map(|a| cov[a * d + a]).sum();

    let (values, vectors) = top_eigenpairs(&cov, d, k, params);
    Ok(PcaModel { mean, inv_std, components: vectors, input_dim: d, k, explained_variance: values, total_variance })
}

impl PcaModel {
    /// Projects rows of `x` onto the components.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim {
            return Err(crate::error::Error::DimensionMismatch {
                what: "PCA input width",
                expected: self.input_dim,
                found: x.cols(),
            });
        }
        let mut out = Matrix::try_zeros(x.rows(), self.k)?;
        let mut z = vec![0.0f64; self.input_dim];
        let mut acc = vec![0.0f64; self.k];
        for i in 0..x.rows() {
            for ((zv, &v), (m, s)) in z.iter_mut().zip(x.row(i)).zip(self.mean.iter().zip(&self.inv_std)) {
                *zv = (v as f64 - m) * s;
            }
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (a, &zv) in z.iter().enumerate() {
                if zv == 0.0 {
                    continue;
                }
                let comp = &self.components[a * self.k..(a + 1) * self.k];
                for (o, &c) in acc.iter_mut().zip(comp) {
                    *o += zv * c;
                }
            }
            for (o, &a) in out.row_mut(i).iter_mut().zip(&acc) {
                *o = a as f32;
            }
        }
        Ok(out)
    }

    /// Component `j` as a vector of length `d_in`.
    pub fn component(&self, j: usize) -> Vec<f64> {
        (0..self.input_dim).map(|a| self.components[a * self.k + j]).collect()
    }

    pub fn explained_ratio(&self) -> Vec<f64> {
        self.explained_variance.iter().map(|v| v / self.total_variance).collect()
    }
}

/// Leading `k` eigenpairs of a symmetric `d x d` matrix; vectors as `d x k` row-major.
pub fn top_eigenpairs(sym: &[f64], d: usize, k: usize, params: &PcaParams) -> (Vec<f64>, Vec<f64>) {
    let l = (k + params.oversample).min(d);
    let mut q = vec![0.0f64; d * l];
    if l == d {
        for a in 0..d {
            q[a * l + a] = 1.0;
        }
    } else {
        let mut rng = SplitMix64::new(params.seed);
        for v in q.iter_mut() {
            *v = rng.next_normal_pair().0;
        }
        orthonormalise(&mut q, d, l);
        for _ in 0..=params.power_iterations {
            q = sym_times(sym, d, &q, l);
            orthonormalise(&mut q, d, l);
        }
    }
    // Rayleigh-Ritz: B = Q^T S Q.
    let sq = sym_times(sym, d, &q, l);
    let mut b = vec![0.0f64; l * l];
    for a in 0..d {
        for i in 0..l {
            let qa = q[a * l + i];
            if qa == 0.0 {
                continue;
            }
            for j in 0..l {
                b[i * l + j] += qa * sq[a * l + j];
            }
        }
    }
    for i in 0..l {
        for j in i + 1..l {
            let m = 0.5 * (b[i * l + j] + b[j * l + i]);
            b[i * l + j] = m;
            b[j * l + i] = m;
        }
    }
    let (vals, vecs) = jacobi_eigen(&b, l);
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let values: Vec<f64> = order[..k].iter().map(|&i| vals[i]).collect();
    let mut out = vec![0.0f64; d * k];
    for a in 0..d {
        for (c, &i) in order[..k].iter().enumerate() {
            out[a * k + c] = (0..l).map(|j| q[a * l + j] * vecs[j * l + i]).sum();
        }
    }
    // Fix signs so the largest-magnitude coordinate of each component is positive.
    for c in 0..k {
        let mut arg = 0;
        for a in 0..d {
            if out[a * k + c].abs() > out[arg * k + c].abs() {
                arg = a;
            }
        }
        if out[arg * k + c] < 0.0 {
            for a in 0..d {
                out[a * k + c] = -out[a * k + c];
            }
        }
    }
    (values, out)
}

fn sym_times(sym: &[f64], d: usize, q: &[f64], l: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; d * l];
    for a in 0..d {
        let row = &sym[a * d..(a + 1) * d];
        let dst = &mut out[a * l..(a + 1) * l];
        for (b, &s) in row.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for (o, &qv) in dst.iter_mut().zip(&q[b * l..(b + 1) * l]) {
                *o += s * qv;
            }
        }
    }
    out
}

/// Modified Gram-Schmidt on the columns of a `d x l` row-major matrix.
/// Columns that collapse numerically are replaced by unit vectors orthogonal to the rest.
fn orthonormalise(q: &mut [f64], d: usize, l: usize) {
    for j in 0..l {
        for _pass in 0..2 {
            for i in 0..j {
                let dot: f64 = (0..d).map(|a| q[a * l + i] * q[a * l + j]).sum();
                for a in 0..d {
                    q[a * l + j] -= dot * q[a * l + i];
                }
            }
        }
        let norm = libm::sqrt((0..d).map(|a| q[a * l + j] * q[a * l + j]).sum::<f64>());
        if norm > 1e-10 {
            for a in 0..d {
                q[a * l + j] /= norm;
            }
        } else {
            // Deterministic replacement: first basis vector with a usable residual.
            for e in 0..d {
                for a in 0..d {
                    q[a * l + j] = if a == e { 1.0 } else { 0.0 };
                }
                for i in 0..j {
                    let dot = q[e * l + i];
                    for a in 0..d {
                        q[a * l + j] -= dot * q[a * l + i];
                    }
                }
                let n2 = libm::sqrt((0..d).map(|a| q[a * l + j] * q[a * l + j]).sum::<f64>());
                if n2 > 1e-6 {
                    for a in 0..d {
                        q[a * l + j] /= n2;
                    }
                    break;
                }
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric `n x n` matrix.
/// Returns eigenvalues and eigenvectors as the columns of an `n x n` row-major matrix.
pub fn jacobi_eigen(sym: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = sym.to_vec();
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j] * a[i * n + j]).sum();
        if off <= 1e-22 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_on_2x2() {
        let (vals, vecs) = jacobi_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        let mut s = vals.clone();
        s.sort_by(f64::total_cmp);
        assert!((s[0] - 1.0).abs() < 1e-12 && (s[1] - 3.0).abs() < 1e-12);
        let dot = vecs[0] * vecs[1] + vecs[2] * vecs[3];
        assert!(dot.abs() < 1e-12);
    }

    #[test]
    fn rank_one_data_reconstructs() {
        // Points on a line in 3-d; after normalisation every column is a
        // multiple of the same centred vector, so one component suffices.
        let x = Matrix::from_fn(40, 3, |i, j| (i as f32 - 20.0) * [1.0, -2.0, 0.5][j] + [3.0, 1.0, -1.0][j]);
        let m = fit_pca(&x, 1).unwrap();
        let ratio = m.explained_ratio()[0];
        assert!((1.0 - ratio) < 1e-6, "explained ratio {ratio}");
    }

    #[test]
    fn components_are_orthonormal_with_subspace_iteration() {
        let mut rng = SplitMix64::new(4);
        let x = Matrix::from_fn(200, 30, |_, j| (rng.next_normal_pair().0 * (1.0 + j as f64 * 0.2)) as f32);
        let m = fit_pca(&x, 5).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let ca = m.component(a);
                let cb = m.component(b);
                let dot: f64 = ca.iter().zip(&cb).map(|(p, q)| p * q).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-4);
            }
        }
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn argument_errors() {
        let x = Matrix::zeros(3, 4);
        assert!(fit_pca(&x, 5).is_err());
        assert!(fit_pca(&x, 0).is_err());
        assert!(fit_pca(&Matrix::zeros(2, 4), 3).is_err());
        let m = fit_pca(&x, 2).unwrap();
        assert!(m.transform(&Matrix::zeros(1, 3)).is_err());
    }
}
