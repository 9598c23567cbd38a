//! Toeplitz column slices of the convolution matrix, least-squares fits and
//! the associated orthogonal projectors.
//!
//! `A_{a,b}` denotes columns `a..b` (zero based, end exclusive) of the
//! `N x N` lower-triangular Toeplitz matrix built from the input, so
//! `A_{a,b}[r, c] = u(r - a - c)` with `u(k) = 0` for `k < 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::signals::Signal;

/// Reciprocal condition number of the Gram matrix below which a fit is
/// rejected as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Lazily indexed view of columns `start..end` of the input's Toeplitz matrix.
#[derive(Debug, Clone, Copy)]
pub struct ToeplitzSlice<'a> {
    input: &'a Signal,
    start: usize,
    end: usize,
}

impl<'a> ToeplitzSlice<'a> {
    pub fn new(input: &'a Signal, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > input.len() {
            return Err(Error::invalid(format!(
                "Toeplitz slice {start}..{end} invalid for input of length {}",
                input.len()
            )));
        }
        Ok(ToeplitzSlice { input, start, end })
    }

    pub fn input(&self) -> &'a Signal {
        self.input
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn rows(&self) -> usize {
        self.input.len()
    }

    pub fn cols(&self) -> usize {
        self.end - self.start
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows() && col < self.cols());
        self.input.at(row as isize - (self.start + col) as isize)
    }

    /// Dense `N x (end - start)` copy.
    pub fn materialize(&self) -> DMatrix<f64> {
        let n = self.rows();
        let u = self.input.samples();
        let mut a = DMatrix::zeros(n, self.cols());
        for c in 0..self.cols() {
            let lag = self.start + c;
            if lag >= n {
                continue;
            }
            a.view_mut((lag, c), (n - lag, 1))
                .copy_from_slice(&u[..n - lag]);
        }
        a
    }

    /// `A * coeffs` without materializing `A`.
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.cols(), "coefficient length mismatch");
        let n = self.rows();
        let u = self.input.samples();
        let mut out = vec![0.0; n];
        for (c, &w) in coeffs.iter().enumerate() {
            let lag = self.start + c;
            if lag >= n || w == 0.0 {
                continue;
            }
            for (o, &x) in out[lag..].iter_mut().zip(u) {
                *o += w * x;
            }
        }
        out
    }

    /// `A^T v`.
    pub fn transpose_apply(&self, v: &[f64]) -> DVector<f64> {
        assert_eq!(v.len(), self.rows(), "vector length mismatch");
        let n = self.rows();
        let u = self.input.samples();
        DVector::from_iterator(
            self.cols(),
            (0..self.cols()).map(|c| {
                let lag = self.start + c;
                if lag >= n {
                    0.0
                } else {
                    v[lag..].iter().zip(u).map(|(a, b)| a * b).sum()
                }
            }),
        )
    }
}

/// Least-squares fit of `y` on a Toeplitz slice.
#[derive(Debug, Clone)]
pub struct LsSolution {
    pub coefficients: DVector<f64>,
    pub residual: Vec<f64>,
    /// `(A^T A)^{-1}`, kept for rank-one updates.
    pub gram_inverse: DMatrix<f64>,
    /// Reciprocal 1-norm condition number of `A^T A`.
    pub rcond: f64,
}

impl LsSolution {
    pub fn residual_norm_sq(&self) -> f64 {
        self.residual.iter().map(|r| r * r).sum()
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Thin `Q`, `R^-1`, `(A^T A)^-1` and the reciprocal condition estimate.
type QrParts = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64);

/// Thin QR of the slice, with the singularity check applied.
fn factor(a: &ToeplitzSlice<'_>) -> Result<QrParts> {
    let dense = a.materialize();
    let qr = dense.qr();
    let r = qr.r();
    let q = qr.q();
    let singular = |rcond: f64| Error::Singular {
        start: a.start(),
        end: a.end(),
        rcond,
    };
    let diag_max = r.diagonal().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let diag_min = r.diagonal().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if diag_max == 0.0 || diag_min <= diag_max * f64::EPSILON {
        return Err(singular(0.0));
    }
    let k = r.ncols();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| singular(0.0))?;
    let gram = r.transpose() * &r;
    let mut gram_inverse = &r_inv * r_inv.transpose();
    gram_inverse = (&gram_inverse + gram_inverse.transpose()) * 0.5;
    let rcond = 1.0 / (norm1(&gram) * norm1(&gram_inverse));
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(singular(rcond));
    }
    Ok((q, r_inv, gram_inverse, rcond))
}

/// Minimize `||y - A theta||^2` via Householder QR of the slice.
pub fn solve_ls(a: &ToeplitzSlice<'_>, y: &Signal) -> Result<LsSolution> {
    if y.len() != a.rows() {
        return Err(Error::invalid(format!(
            "output length {} does not match input length {}",
            y.len(),
            a.rows()
        )));
    }
    let (q, r_inv, gram_inverse, rcond) = factor(a)?;
    let qty = q.transpose() * DVector::from_column_slice(y.samples());
    let coefficients = r_inv * qty;
    let fitted = a.apply(coefficients.as_slice());
    let residual = y
        .samples()
        .iter()
        .zip(&fitted)
        .map(|(obs, fit)| obs - fit)
        .collect();
    Ok(LsSolution {
        coefficients,
        residual,
        gram_inverse,
        rcond,
    })
}

/// `H = A (A^T A)^{-1} A^T` and `G = I - H`, applied through an orthonormal
/// basis of the column space.
#[derive(Debug, Clone)]
pub struct ProjectorPair {
    basis: DMatrix<f64>,
}

impl ProjectorPair {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Projection onto the column space.
    pub fn apply_h(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim(), "vector length mismatch");
        let v = DVector::from_column_slice(v);
        let coords = self.basis.tr_mul(&v);
        (&self.basis * coords).data.into()
    }

    /// Projection onto the orthogonal complement.
    pub fn apply_g(&self, v: &[f64]) -> Vec<f64> {
        let h = self.apply_h(v);
        v.iter().zip(h).map(|(a, b)| a - b).collect()
    }
}

pub fn project_pair(a: &ToeplitzSlice<'_>) -> Result<ProjectorPair> {
    let (q, ..) = factor(a)?;
    Ok(ProjectorPair { basis: q })
}

/// Gram matrix `A_{0,M}^T A_{0,M}`, `A_{0,M}^T y` and `||y||^2` for one
/// input/output record, built from the Toeplitz structure in `O(N M)`.
///
/// Any slice `A_{d,m}` with `m <= M` has Gram block `K[d..m, d..m]`, and the
/// Cholesky factor of a leading block is the leading block of the factor
/// (the same triangle a QR of the slice produces), so one factorization per
/// delay yields the residuals of every nested length.
#[derive(Debug, Clone)]
pub struct ToeplitzGram {
    n: usize,
    max_len: usize,
    gram: Vec<f64>,
    cross: Vec<f64>,
    output_energy: f64,
}

impl ToeplitzGram {
    pub fn new(u: &Signal, y: &Signal, max_len: usize) -> Result<Self> {
        let n = u.len();
        if y.len() != n {
            return Err(Error::invalid(format!(
                "input length {n} and output length {} differ",
                y.len()
            )));
        }
        if max_len == 0 || max_len > n {
            return Err(Error::invalid(format!(
                "maximum length {max_len} must lie in 1..={n}"
            )));
        }
        let us = u.samples();
        let ys = y.samples();
        let mut gram = vec![0.0; max_len * max_len];
        for j in 0..max_len {
            let v: f64 = us[j..].iter().zip(us).map(|(a, b)| a * b).sum();
            gram[j] = v;
            gram[j * max_len] = v;
        }
        for i in 1..max_len {
            for j in i..max_len {
                let v = gram[(i - 1) * max_len + (j - 1)] - us[n - i] * us[n - j];
                gram[i * max_len + j] = v;
                gram[j * max_len + i] = v;
            }
        }
        let cross = (0..max_len)
            .map(|j| ys[j..].iter().zip(us).map(|(a, b)| a * b).sum())
            .collect();
        Ok(ToeplitzGram {
            n,
            max_len,
            gram,
            cross,
            output_energy: ys.iter().map(|v| v * v).sum(),
        })
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    #[inline]
    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.max_len + j]
    }

    pub fn output_energy(&self) -> f64 {
        self.output_energy
    }

    /// Residual energies `||y - A_{d,m} theta_hat||^2` for `m = d+1 ..= M`
    /// (element `k - 1` belongs to `m = d + k`).
    pub fn nested_residuals(&self, delay: usize) -> Result<Vec<f64>> {
        Ok(self.nested_factor(delay)?.residuals(self.output_energy))
    }

    /// Cholesky factor of `K[d.., d..]` with the matching projected output.
    pub fn nested_factor(&self, delay: usize) -> Result<NestedCholesky> {
        if delay >= self.max_len {
            return Err(Error::invalid(format!(
                "delay {delay} must be below the maximum length {}",
                self.max_len
            )));
        }
        let dim = self.max_len - delay;
        let mut l = vec![0.0; dim * dim];
        for j in 0..dim {
            let gj = delay + j;
            let diag = self.gram(gj, gj);
            let row_j = &l[j * dim..j * dim + j];
            let pivot_sq = diag - row_j.iter().map(|v| v * v).sum::<f64>();
            if !(pivot_sq > diag * RCOND_THRESHOLD) || diag <= 0.0 {
                return Err(Error::Singular {
                    start: delay,
                    end: delay + j + 1,
                    rcond: if diag > 0.0 { (pivot_sq / diag).max(0.0) } else { 0.0 },
                });
            }
            let pivot = pivot_sq.sqrt();
            l[j * dim + j] = pivot;
            for i in j + 1..dim {
                let dot: f64 = l[i * dim..i * dim + j]
                    .iter()
                    .zip(&l[j * dim..j * dim + j])
                    .map(|(a, b)| a * b)
                    .sum();
                l[i * dim + j] = (self.gram(delay + i, gj) - dot) / pivot;
            }
        }
        let mut factor = NestedCholesky {
            dim,
            lower: l,
            cross: self.cross[delay..].to_vec(),
            z: vec![0.0; dim],
        };
        factor.refresh();
        Ok(factor)
    }
}

/// Lower Cholesky factor `L` of the Gram block `K[d.., d..]` (row major),
/// together with `A^T y` and `z = L^{-1} A^T y`.
///
/// Leading `k x k` blocks belong to the nested slices `A_{d, d+k}`, so
/// `||y||^2 - sum(z[..k]^2)` is the residual energy of that fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedCholesky {
    dim: usize,
    lower: Vec<f64>,
    cross: Vec<f64>,
    z: Vec<f64>,
}

impl NestedCholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    pub fn projected_output(&self) -> &[f64] {
        &self.z
    }

    pub fn residuals(&self, output_energy: f64) -> Vec<f64> {
        let mut explained = 0.0;
        self.z
            .iter()
            .map(|v| {
                explained += v * v;
                (output_energy - explained).max(0.0)
            })
            .collect()
    }

    /// Append one data row `b` with output `y_new`: `K += b b^T`,
    /// `A^T y += b y_new`. `b` is used as scratch.
    pub fn rank_one_update(&mut self, b: &mut [f64], y_new: f64) {
        assert_eq!(b.len(), self.dim, "row length mismatch");
        let dim = self.dim;
        for (c, bv) in self.cross.iter_mut().zip(b.iter()) {
            *c += bv * y_new;
        }
        for k in 0..dim {
            let lkk = self.lower[k * dim + k];
            let r = lkk.hypot(b[k]);
            let c = r / lkk;
            let s = b[k] / lkk;
            self.lower[k * dim + k] = r;
            for i in k + 1..dim {
                let lik = (self.lower[i * dim + k] + s * b[i]) / c;
                self.lower[i * dim + k] = lik;
                b[i] = c * b[i] - s * lik;
            }
        }
        self.refresh();
    }

    fn refresh(&mut self) {
        let dim = self.dim;
        for j in 0..dim {
            let row = &self.lower[j * dim..j * dim + j];
            let dot: f64 = row.iter().zip(&self.z[..j]).map(|(a, b)| a * b).sum();
            self.z[j] = (self.cross[j] - dot) / self.lower[j * dim + j];
        }
    }

    /// Coefficients of the nested fit with `len` columns.
    pub fn solve_leading(&self, len: usize) -> Vec<f64> {
        assert!(len >= 1 && len <= self.dim, "length {len} outside 1..={}", self.dim);
        let dim = self.dim;
        let mut theta = self.z[..len].to_vec();
        for i in (0..len).rev() {
            let mut v = theta[i];
            for j in i + 1..len {
                v -= self.lower[j * dim + i] * theta[j];
            }
            theta[i] = v / self.lower[i * dim + i];
        }
        theta
    }
}
