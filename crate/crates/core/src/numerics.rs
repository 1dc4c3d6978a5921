//! Small dense complex linear algebra and Gaussian sampling.
//!
//! The systems solved here are tiny (at most users × users, with tens of
//! users), so a compact row-major matrix type with a hand-written Cholesky
//! factorization covers everything the simulator needs without pulling in a
//! full linear-algebra stack.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::RngStream;
use crate::{Error, Result};

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix from row-major data. The length must match the shape.
    pub fn from_data(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Argument(format!(
                "matrix data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    /// Row `r` as a contiguous slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Copies rows `start..start + count` into a new matrix.
    pub fn row_block(&self, start: usize, count: usize) -> Result<Self> {
        if start + count > self.rows {
            return Err(Error::Argument(format!(
                "row block {start}..{} exceeds {} rows",
                start + count,
                self.rows
            )));
        }
        Ok(Self {
            rows: count,
            cols: self.cols,
            data: self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        })
    }

    /// Stacks matrices vertically. All blocks must share the column count.
    pub fn vstack(blocks: &[&ComplexMatrix]) -> Result<Self> {
        let cols = blocks
            .first()
            .ok_or_else(|| Error::Argument("cannot stack zero blocks".into()))?
            .cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for b in blocks {
            if b.cols != cols {
                return Err(Error::Argument(format!(
                    "column mismatch while stacking: {} vs {cols}",
                    b.cols
                )));
            }
            data.extend_from_slice(&b.data);
            rows += b.rows;
        }
        Ok(Self { rows, cols, data })
    }

    /// `A x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::Argument(format!(
                "vector length {} does not match {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<Complex64>()
            })
            .collect())
    }

    /// `A^H y` (conjugate-transpose product).
    pub fn herm_mul_vec(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.rows {
            return Err(Error::Argument(format!(
                "vector length {} does not match {} rows",
                y.len(),
                self.rows
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let yr = y[r];
            for (o, h) in out.iter_mut().zip(row) {
                *o += h.conj() * yr;
            }
        }
        Ok(out)
    }

    /// Gram matrix `A^H A` (cols × cols, Hermitian positive semidefinite).
    pub fn gram(&self) -> ComplexMatrix {
        let k = self.cols;
        let mut g = ComplexMatrix::zeros(k, k);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..k {
                let hi = row[i].conj();
                for j in 0..k {
                    let v = g.get(i, j) + hi * row[j];
                    g.set(i, j, v);
                }
            }
        }
        g
    }

    /// Adds `lambda` to the diagonal in place.
    pub fn add_diagonal(&mut self, lambda: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            let v = self.get(i, i) + Complex64::new(lambda, 0.0);
            self.set(i, i, v);
        }
    }
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
pub struct CholeskyFactor {
    n: usize,
    l: Vec<Complex64>, // row-major lower triangle, full n*n storage
}

/// Factors a Hermitian positive definite matrix as `A = L L^H`.
///
/// Only the lower triangle of `A` is read. Fails with a numerical error if a
/// pivot is not strictly positive (matrix not positive definite).
pub fn cholesky(a: &ComplexMatrix) -> Result<CholeskyFactor> {
    if a.rows() != a.cols() {
        return Err(Error::Argument(format!(
            "cholesky requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = a.get(j, j).re;
        for p in 0..j {
            d -= l[j * n + p].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "matrix is not positive definite: pivot {d:e} at leading minor {}",
                j + 1
            )));
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(CholeskyFactor { n, l })
}

impl CholeskyFactor {
    /// Solves `A x = b` given the factorization of `A`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.n {
            return Err(Error::Argument(format!(
                "right-hand side length {} does not match dimension {}",
                b.len(),
                self.n
            )));
        }
        let n = self.n;
        // Forward substitution: L y = b.
        let mut y = b.to_vec();
        for i in 0..n {
            for p in 0..i {
                let lp = self.l[i * n + p];
                y[i] = y[i] - lp * y[p];
            }
            y[i] /= self.l[i * n + i];
        }
        // Backward substitution: L^H x = y.
        let mut x = y;
        for i in (0..n).rev() {
            for p in (i + 1)..n {
                let lp = self.l[p * n + i].conj();
                x[i] = x[i] - lp * x[p];
            }
            x[i] /= self.l[i * n + i];
        }
        Ok(x)
    }

    /// Diagonal of `A^{-1}`: entry `k` equals `‖L^{-1} e_k‖²`, which is real
    /// and positive for a positive definite `A`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.n;
        let mut diag = vec![0.0; n];
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            for c in col.iter_mut() {
                *c = Complex64::new(0.0, 0.0);
            }
            col[k] = Complex64::new(1.0, 0.0);
            for i in k..n {
                for p in k..i {
                    let lp = self.l[i * n + p];
                    col[i] = col[i] - lp * col[p];
                }
                col[i] /= self.l[i * n + i];
            }
            diag[k] = col[k..].iter().map(|v| v.norm_sqr()).sum();
        }
        diag
    }
}

/// Solves the Hermitian positive definite system `A x = b` by Cholesky
/// factorization.
pub fn hermitian_solve(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    cholesky(a)?.solve(b)
}

/// Draws `len` i.i.d. circularly-symmetric complex Gaussian samples with the
/// given total variance (each real/imaginary part has variance `variance/2`).
pub fn sample_complex_gaussian(
    stream: &mut RngStream,
    len: usize,
    variance: f64,
) -> Result<Vec<Complex64>> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Argument(format!(
            "variance must be finite and non-negative, got {variance}"
        )));
    }
    let scale = (variance * 0.5).sqrt();
    Ok((0..len)
        .map(|_| {
            let re: f64 = stream.sample(StandardNormal);
            let im: f64 = stream.sample(StandardNormal);
            Complex64::new(scale * re, scale * im)
        })
        .collect())
}
