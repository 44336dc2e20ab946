//! Small dense linear algebra: row-major matrices, vectors, Cholesky
//! factorization for SPD systems and a few spectral helpers.
//!
//! Sizes in this crate are tiny (decision dimension d and agent count n are
//! at most a few hundred), so everything is plain loops over `Vec<f64>`.
//! Loop order is fixed, which keeps every result bitwise reproducible.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{dim_mismatch, Error, Result};

/// Relative tolerance for the symmetry precondition of [`spd_factorize`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Maximum row/column-sum deviation accepted by [`second_singular_value`].
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn from_vec(entries: Vec<f64>) -> Self {
        Vector(entries)
    }

    pub fn from_slice(entries: &[f64]) -> Self {
        Vector(entries.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * s).collect())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Vector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, v) in diag.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Every row equal to `row`.
    pub fn repeat_row(row: &Vector, n: usize) -> Self {
        let mut data = Vec::with_capacity(n * row.len());
        for _ in 0..n {
            data.extend_from_slice(row.as_slice());
        }
        Matrix {
            rows: n,
            cols: row.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vector(&self, i: usize) -> Vector {
        Vector::from_slice(self.row(i))
    }

    pub fn set_row(&mut self, i: usize, v: &[f64]) {
        self.row_mut(i).copy_from_slice(v);
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(dim_mismatch(
                format!("{} rows on right operand", self.cols),
                rhs.rows,
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = rhs.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.len() {
            return Err(dim_mismatch(self.cols, v.len()));
        }
        Ok(Vector::from_vec(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Column-wise sum, i.e. `1ᵀ M`.
    pub fn column_sums(&self) -> Vector {
        let mut out = Vector::zeros(self.cols);
        for i in 0..self.rows {
            for (o, v) in out.as_mut_slice().iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vector {
        Vector::from_vec((0..self.rows).map(|i| self.row(i).iter().sum()).collect())
    }

    pub fn column_means(&self) -> Vector {
        self.column_sums().scale(1.0 / self.rows as f64)
    }

    /// `max |M_ij - M_ji|`; `None` for non-square input.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        Some(worst)
    }

    /// Applies `n` successive right-multiplications by `self`, i.e. `self^n`.
    /// `power(1)` is a copy; the accumulation order is `((M·M)·M)·…`.
    pub fn power(&self, n: usize) -> Result<Matrix> {
        if !self.is_square() {
            return Err(dim_mismatch("square matrix", format!("{}x{}", self.rows, self.cols)));
        }
        let mut out = Matrix::identity(self.rows);
        if n == 0 {
            return Ok(out);
        }
        out = self.clone();
        for _ in 1..n {
            out = out.matmul(self)?;
        }
        Ok(out)
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &Matrix {
    type Output = Matrix;
    fn mul(self, s: f64) -> Matrix {
        self.scale(s)
    }
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = H`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdFactorization {
    lower: Matrix,
}

impl SpdFactorization {
    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Solves `H v = b` by forward then backward substitution.
    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        spd_solve(self, b)
    }
}

pub fn spd_factorize(h: &Matrix) -> Result<SpdFactorization> {
    if !h.is_square() || h.rows() == 0 {
        return Err(dim_mismatch(
            "non-empty square matrix",
            format!("{}x{}", h.rows(), h.cols()),
        ));
    }
    let scale = h.max_abs();
    let asym = h.asymmetry().unwrap_or(0.0);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(if scale > 0.0 { asym / scale } else { asym }));
    }

    let d = h.rows();
    let mut l = Matrix::zeros(d, d);
    for j in 0..d {
        let mut pivot = h[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..d {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(SpdFactorization { lower: l })
}

pub fn spd_solve(f: &SpdFactorization, b: &Vector) -> Result<Vector> {
    let d = f.dim();
    if b.len() != d {
        return Err(dim_mismatch(d, b.len()));
    }
    let l = &f.lower;
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in (i + 1)..d {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    Ok(Vector::from_vec(y))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(h: &Matrix) -> Result<Vec<f64>> {
    if !h.is_square() {
        return Err(dim_mismatch("square matrix", format!("{}x{}", h.rows(), h.cols())));
    }
    let mut ev: Vec<f64> = h.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Largest singular value of `P - (1/n)11ᵀ`: the per-round contraction of
/// disagreement under consensus with `P`.
pub fn second_singular_value(p: &Matrix) -> Result<f64> {
    if !p.is_square() || p.rows() == 0 {
        return Err(dim_mismatch(
            "non-empty square matrix",
            format!("{}x{}", p.rows(), p.cols()),
        ));
    }
    let dev = stochastic_deviation(p);
    if dev > STOCHASTIC_TOL {
        return Err(Error::NotStochastic(dev));
    }
    Ok(projected_spectral_norm(p))
}

/// `‖P - (1/n)11ᵀ‖₂` without the stochasticity precondition. Panics on a
/// non-square input.
pub fn projected_spectral_norm(p: &Matrix) -> f64 {
    assert!(p.is_square(), "projected_spectral_norm needs a square matrix");
    let n = p.rows();
    let avg = 1.0 / n as f64;
    let projected = Matrix::from_fn(n, n, |i, j| p[(i, j)] - avg);
    let sv = projected.to_nalgebra().singular_values();
    sv.iter().fold(0.0f64, |m, v| m.max(*v))
}

/// Maximum deviation of any row or column sum from 1.
pub fn stochastic_deviation(p: &Matrix) -> f64 {
    p.row_sums()
        .iter()
        .chain(p.column_sums().iter())
        .fold(0.0f64, |m, s| m.max((s - 1.0).abs()))
}
