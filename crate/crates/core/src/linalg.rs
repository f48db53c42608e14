//! Dense real linear algebra.
//!
//! [`Matrix`] is the operator representation used everywhere in the crate.
//! Zero-dimensional shapes (`n×0`, `0×n`) are ordinary values, so a rank-0
//! skeleton factorization has factors with an empty inner dimension and
//! needs no special casing downstream.
//!
//! The singular value decomposition, Schur form and LU solves are delegated
//! to `nalgebra`; this module owns the rank rule, the factor convention and
//! the error contract.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use nalgebra::Complex;

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const MAX_ITERATIONS: usize = 10_000;
/// Convergence thresholds tried in turn for the Schur iteration. Each result
/// is checked against the input and the next threshold tried if it does not
/// reproduce it.
const SWEEP_EPS: [f64; 5] = [5.0 * f64::EPSILON, 1e-14, 1e-13, 1e-12, 1e-11];

/// Backward-error bound accepted for a decomposition computed at `eps`.
fn accepted_error(m: &DMatrix<f64>, eps: f64) -> f64 {
    let n = m.nrows().max(m.ncols()) as f64;
    10.0 * n * eps.max(10.0 * f64::EPSILON) * m.amax().max(f64::MIN_POSITIVE)
}

fn orthonormal_columns(q: &DMatrix<f64>) -> bool {
    let gram = q.transpose() * q;
    (gram - DMatrix::identity(q.ncols(), q.ncols())).amax()
        <= 100.0 * q.nrows() as f64 * f64::EPSILON
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    BadLength {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("ragged rows: row {row} has {got} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("matrix is singular at tolerance (sigma_min {sigma_min:e}, cutoff {cutoff:e})")]
    Singular { sigma_min: f64, cutoff: f64 },
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
}

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting NaN and infinities.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        let m = Matrix { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(LinalgError::Ragged {
                    row: i,
                    expected: n_cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::new(n_rows, n_cols, data)
    }

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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
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

    /// Block-diagonal matrix `diag(a, b)`.
    pub fn block_diag(a: &Matrix, b: &Matrix) -> Self {
        let rows = a.rows + b.rows;
        let cols = a.cols + b.cols;
        Matrix::from_fn(rows, cols, |i, j| {
            if i < a.rows && j < a.cols {
                a.get(i, j)
            } else if i >= a.rows && j >= a.cols {
                b.get(i - a.rows, j - a.cols)
            } else {
                0.0
            }
        })
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of bounds"
        );
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of bounds"
        );
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Largest absolute entry; zero for empty matrices.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Matrix-vector product. Panics on a length mismatch.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "mul_vec: vector length mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self^k` for a square matrix.
    pub fn pow(&self, k: usize) -> Matrix {
        assert!(self.is_square(), "pow requires a square matrix");
        let mut out = Matrix::identity(self.rows);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn check_finite(&self) -> Result<(), LinalgError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(LinalgError::NonFinite {
                row: k / self.cols.max(1),
                col: k % self.cols.max(1),
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matrix product shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "add: shape mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "sub: shape mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Thin singular value decomposition `m = u · diag(singular_values) · v_t`,
/// singular values in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v_t: Matrix,
}

pub fn svd(m: &Matrix) -> Result<Svd, LinalgError> {
    m.check_finite()?;
    if m.rows >= m.cols {
        jacobi_svd(m)
    } else {
        // A = (Aᵀ)ᵀ = V Σ Uᵀ
        let t = jacobi_svd(&m.transpose())?;
        Ok(Svd {
            u: t.v_t.transpose(),
            singular_values: t.singular_values,
            v_t: t.u.transpose(),
        })
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD of a matrix with `rows ≥ cols`.
///
/// Column pairs of `W = A·V` are rotated until mutually orthogonal to working
/// precision; then `σⱼ = ‖wⱼ‖` and `uⱼ = wⱼ/σⱼ`. Columns whose norm is at
/// rounding level carry no direction, so those `uⱼ` are replaced by an
/// orthonormal completion of the others.
fn jacobi_svd(m: &Matrix) -> Result<Svd, LinalgError> {
    let (rows, n) = (m.rows, m.cols);
    if n == 0 {
        return Ok(Svd {
            u: Matrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v_t: Matrix::zeros(0, 0),
        });
    }
    // column-major working copies
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..rows).map(|i| m.get(i, j)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let rotate = |cols: &mut Vec<Vec<f64>>, i: usize, j: usize, c: f64, s: f64| {
        let (lo, hi) = cols.split_at_mut(j);
        for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
            let (a, b) = (*x, *y);
            *x = c * a - s * b;
            *y = s * a + c * b;
        }
    };

    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&w[i], &w[i]);
                let beta = dot(&w[j], &w[j]);
                let gamma = dot(&w[i], &w[j]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(LinalgError::NoConvergence("singular value decomposition"));
    }

    let sigma: Vec<f64> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let sigma_max = sigma[order[0]];
    let floor = rows as f64 * f64::EPSILON * sigma_max;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for &j in &order {
        let col = if sigma[j] > floor {
            w[j].iter().map(|x| x / sigma[j]).collect()
        } else {
            completion_vector(&u_cols, rows)
        };
        u_cols.push(col);
    }
    Ok(Svd {
        u: Matrix::from_fn(rows, n, |i, k| u_cols[k][i]),
        singular_values: order.iter().map(|&j| sigma[j]).collect(),
        v_t: Matrix::from_fn(n, n, |k, i| v[order[k]][i]),
    })
}

/// A unit vector orthogonal to every column in `basis` (which must have
/// fewer than `dim` entries): the coordinate axis with the largest residual
/// after two rounds of Gram–Schmidt.
fn completion_vector(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let project_out = |mut x: Vec<f64>| {
        for _ in 0..2 {
            for q in basis {
                let c: f64 = q.iter().zip(&x).map(|(a, b)| a * b).sum();
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi -= c * qi;
                }
            }
        }
        x
    };
    let best = (0..dim)
        .map(|e| project_out((0..dim).map(|i| if i == e { 1.0 } else { 0.0 }).collect()))
        .max_by(|a, b| norm2(a).total_cmp(&norm2(b)))
        .expect("dim > 0");
    let mut x = project_out(best);
    let len = norm2(&x);
    x.iter_mut().for_each(|xi| *xi /= len);
    x
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_tol(tol: f64) -> Result<(), LinalgError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(LinalgError::BadTolerance(tol))
    }
}

fn rank_from_singular_values(sv: &[f64], tol: f64) -> (usize, f64) {
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let cutoff = tol * sigma_max;
    if sigma_max == 0.0 {
        return (0, cutoff);
    }
    (sv.iter().filter(|&&s| s > cutoff).count(), cutoff)
}

/// Numerical rank: the number of singular values above `tol · σ_max`.
pub fn rank_of(m: &Matrix, tol: f64) -> Result<usize, LinalgError> {
    check_tol(tol)?;
    let sv = svd(m)?.singular_values;
    Ok(rank_from_singular_values(&sv, tol).0)
}

/// A singular value that sits within a factor of ten of the rank cutoff, so
/// the rank decision is sensitive to the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceWarning {
    pub singular_value: f64,
    pub cutoff: f64,
}

impl fmt::Display for ToleranceWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tolerance ambiguous: singular value {:e} is within 10x of cutoff {:e}",
            self.singular_value, self.cutoff
        )
    }
}

/// Full-rank (skeleton) factorization `m ≈ left · right` with both factors of
/// rank `rank`.
#[derive(Debug, Clone)]
pub struct SkeletonFactorization {
    /// `rows × rank`
    pub left: Matrix,
    /// `rank × cols`, orthonormal rows.
    pub right: Matrix,
    pub rank: usize,
    pub tol_used: f64,
    pub warning: Option<ToleranceWarning>,
}

/// Rank-revealing skeleton factorization from a truncated SVD.
///
/// With `m = U Σ Vᵀ` truncated to the numerical rank `r`, returns
/// `left = U_r Σ_r` and `right = V_rᵀ`. Each row of `right` is signed so its
/// largest-magnitude entry is positive (first such entry on ties), which makes
/// the output deterministic for distinct singular values.
pub fn full_rank_factorize(m: &Matrix, tol: f64) -> Result<SkeletonFactorization, LinalgError> {
    check_tol(tol)?;
    let dec = svd(m)?;
    let (rank, cutoff) = rank_from_singular_values(&dec.singular_values, tol);

    let warning = dec
        .singular_values
        .iter()
        .find(|&&s| s > 0.0 && s >= cutoff / 10.0 && s <= cutoff * 10.0)
        .map(|&s| ToleranceWarning {
            singular_value: s,
            cutoff,
        });

    let mut left = Matrix::from_fn(m.rows, rank, |i, j| {
        dec.u.get(i, j) * dec.singular_values[j]
    });
    let mut right = Matrix::from_fn(rank, m.cols, |i, j| dec.v_t.get(i, j));
    for k in 0..rank {
        let mut pivot = 0.0f64;
        for &v in right.row(k) {
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        if pivot < 0.0 {
            for j in 0..m.cols {
                right.set(k, j, -right.get(k, j));
            }
            for i in 0..m.rows {
                left.set(i, k, -left.get(i, k));
            }
        }
    }

    Ok(SkeletonFactorization {
        left,
        right,
        rank,
        tol_used: tol,
        warning,
    })
}

/// All eigenvalues with algebraic multiplicity, in no particular order.
///
/// Computed from the real Schur form; the result is backward stable, i.e. the
/// exact eigenvalues of `m + E` with `‖E‖ ≈ n·ε·‖m‖`. Eigenvalues belonging to
/// a defective block of size `k` can therefore move by `O(ε^{1/k})`.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex<f64>>, LinalgError> {
    m.check_finite()?;
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    match m.rows {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Complex::new(m.data[0], 0.0)]),
        _ => {
            let a = m.to_nalgebra();
            SWEEP_EPS
                .iter()
                .filter_map(|&eps| {
                    let schur = nalgebra::Schur::try_new(a.clone(), eps, MAX_ITERATIONS)?;
                    let eig: Vec<Complex<f64>> =
                        schur.complex_eigenvalues().iter().copied().collect();
                    let (q, t) = schur.unpack();
                    let valid = (&q * t * q.transpose() - &a).amax() <= accepted_error(&a, eps)
                        && orthonormal_columns(&q);
                    valid.then_some(eig)
                })
                .next()
                .ok_or(LinalgError::NoConvergence("Schur iteration"))
        }
    }
}

/// Largest real part of a spectrum; `-inf` for an empty one.
pub fn spectral_abscissa(spectrum: &[Complex<f64>]) -> f64 {
    spectrum
        .iter()
        .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re))
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub solution: Vec<f64>,
    /// 2-norm condition number `σ_max / σ_min`.
    pub condition: f64,
}

fn nonsingular_condition(m: &Matrix) -> Result<f64, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    if m.rows == 0 {
        return Ok(1.0);
    }
    let sv = svd(m)?.singular_values;
    let sigma_max = sv[0];
    let sigma_min = *sv.last().unwrap();
    let cutoff = DEFAULT_RANK_TOL * sigma_max;
    if sigma_max == 0.0 || sigma_min <= cutoff {
        return Err(LinalgError::Singular { sigma_min, cutoff });
    }
    Ok(sigma_max / sigma_min)
}

/// Solves `m · y = rhs` by partially pivoted LU with one step of iterative
/// refinement.
pub fn solve_linear(m: &Matrix, rhs: &[f64]) -> Result<LinearSolution, LinalgError> {
    let condition = nonsingular_condition(m)?;
    if rhs.len() != m.rows {
        return Err(LinalgError::Dimension(format!(
            "right-hand side has length {}, matrix has {} rows",
            rhs.len(),
            m.rows
        )));
    }
    if let Some(k) = rhs.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite { row: k, col: 0 });
    }
    if m.rows == 0 {
        return Ok(LinearSolution {
            solution: Vec::new(),
            condition,
        });
    }
    let lu = m.to_nalgebra().lu();
    let b = DVector::from_column_slice(rhs);
    let mut y = lu.solve(&b).ok_or(LinalgError::Singular {
        sigma_min: 0.0,
        cutoff: 0.0,
    })?;
    let residual: Vec<f64> = m
        .mul_vec(y.as_slice())
        .iter()
        .zip(rhs)
        .map(|(a, b)| b - a)
        .collect();
    if let Some(correction) = lu.solve(&DVector::from_column_slice(&residual)) {
        y += correction;
    }
    Ok(LinearSolution {
        solution: y.as_slice().to_vec(),
        condition,
    })
}

/// Inverse of a nonsingular square matrix.
pub fn inverse(m: &Matrix) -> Result<Matrix, LinalgError> {
    nonsingular_condition(m)?;
    if m.rows == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let inv = m
        .to_nalgebra()
        .lu()
        .try_inverse()
        .ok_or(LinalgError::Singular {
            sigma_min: 0.0,
            cutoff: 0.0,
        })?;
    Ok(Matrix::from_nalgebra(&inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = Matrix::new(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert_eq!(err, LinalgError::NonFinite { row: 0, col: 1 });
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn svd_reconstructs_nilpotent_input() {
        // rank one with B² = 0; a too-tight sweep threshold used to lose it
        let b = m(&[
            &[-0.3666186514053384, -0.20604068237407439],
            &[0.6523431878091152, 0.3666186514053384],
        ]);
        let d = svd(&b).unwrap();
        let rec = &(&d.u * &Matrix::diagonal(&d.singular_values)) * &d.v_t;
        assert!((&rec - &b).max_norm() < 1e-14);
        assert_eq!(rank_of(&b, 1e-10).unwrap(), 1);

        let b = m(&[
            &[0.02195726666320169, -0.26621270385612816],
            &[0.0018110388885857337, -0.021957266663202413],
        ]);
        let d = svd(&b).unwrap();
        let rec = &(&d.u * &Matrix::diagonal(&d.singular_values)) * &d.v_t;
        assert!((&rec - &b).max_norm() < 1e-14);
    }

    #[test]
    fn factorize_identity_and_zero() {
        let f = full_rank_factorize(&Matrix::identity(2), 1e-10).unwrap();
        assert_eq!(f.rank, 2);
        let prod = &f.left * &f.right;
        assert!((&prod - &Matrix::identity(2)).max_norm() <= 1e-10);

        let f = full_rank_factorize(&Matrix::zeros(2, 2), 1e-10).unwrap();
        assert_eq!(f.rank, 0);
        assert_eq!((f.left.rows(), f.left.cols()), (2, 0));
        assert_eq!((f.right.rows(), f.right.cols()), (0, 2));
        assert_eq!(&f.left * &f.right, Matrix::zeros(2, 2));
    }

    #[test]
    fn factorize_shift_matrix_sign_convention() {
        let b = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let f = full_rank_factorize(&b, 1e-10).unwrap();
        assert_eq!(f.rank, 1);
        assert!((f.right.get(0, 1) - 1.0).abs() < 1e-15);
        assert!(f.right.get(0, 0).abs() < 1e-15);
        assert!((f.left.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(f.left.get(1, 0).abs() < 1e-15);
        assert!(f.warning.is_none());
    }

    #[test]
    fn factorize_flags_ambiguous_tolerance() {
        let b = Matrix::diagonal(&[1.0, 3e-10]);
        let f = full_rank_factorize(&b, 1e-10).unwrap();
        assert_eq!(f.rank, 2);
        assert!(f.warning.is_some());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_of(&Matrix::identity(3), 1e-10).unwrap(), 3);
        assert_eq!(rank_of(&Matrix::zeros(3, 2), 1e-10).unwrap(), 0);
        assert_eq!(rank_of(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), 1e-10).unwrap(), 1);
        assert!(matches!(
            rank_of(&Matrix::identity(2), 0.0),
            Err(LinalgError::BadTolerance(_))
        ));
    }

    #[test]
    fn eigenvalue_examples() {
        let mut ev = eigenvalues(&Matrix::diagonal(&[-1.0, -2.0])).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0].re + 2.0).abs() < 1e-14 && (ev[1].re + 1.0).abs() < 1e-14);

        let ev = eigenvalues(&m(&[&[0.0, 1.0], &[-1.0, 0.0]])).unwrap();
        assert_eq!(ev.len(), 2);
        for z in &ev {
            assert!(z.re.abs() < 1e-14 && (z.im.abs() - 1.0).abs() < 1e-14);
        }
        assert!((ev[0].im + ev[1].im).abs() < 1e-14);

        assert_eq!(
            eigenvalues(&m(&[&[3.0]])).unwrap(),
            vec![Complex::new(3.0, 0.0)]
        );
        assert!(eigenvalues(&Matrix::zeros(0, 0)).unwrap().is_empty());
        assert!(matches!(
            eigenvalues(&Matrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn solve_examples() {
        let s = solve_linear(&Matrix::identity(2), &[3.0, 4.0]).unwrap();
        assert_eq!(s.solution, vec![3.0, 4.0]);
        let s = solve_linear(&Matrix::diagonal(&[2.0, 4.0]), &[2.0, 8.0]).unwrap();
        assert_eq!(s.solution, vec![1.0, 2.0]);
        assert!((s.condition - 2.0).abs() < 1e-12);
        let s = solve_linear(&m(&[&[1.0, 1.0], &[0.0, 1.0]]), &[3.0, 1.0]).unwrap();
        assert!((s.solution[0] - 2.0).abs() < 1e-15 && (s.solution[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solve_rejects_singular() {
        let err = solve_linear(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, LinalgError::Singular { .. }));
        assert!(inverse(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let a = m(&[&[4.0, 1.0], &[2.0, 3.0]]);
        let inv = inverse(&a).unwrap();
        assert!((&(&a * &inv) - &Matrix::identity(2)).max_norm() < 1e-15);
    }

    #[test]
    fn block_diag_and_pow() {
        let n = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let b = Matrix::block_diag(&Matrix::diagonal(&[5.0]), &n);
        assert_eq!(b.rows(), 3);
        assert_eq!(b.get(0, 0), 5.0);
        assert_eq!(b.get(1, 2), 1.0);
        assert_eq!(n.pow(2), Matrix::zeros(2, 2));
        assert_eq!(n.pow(0), Matrix::identity(2));
    }
}
