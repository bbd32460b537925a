//! Small dense symmetric-matrix kernel shared by every learner.
//!
//! Everything here is a thin layer over `nalgebra`: Cholesky is the only
//! factorization used for solves and log-determinants, and eigenvalue
//! extremes come from a full symmetric eigen-decomposition. Matrices are
//! re-symmetrized after every in-place update.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense real vector.
pub type Vector = DVector<f64>;

/// Dense symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self(DMatrix::identity(dim, dim) * scale)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Wraps a square matrix, replacing it with `(A + Aᵀ)/2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let mut s = Self(m);
        s.symmetrize();
        Ok(s)
    }

    /// Row-major constructor, mainly for tests and fixtures.
    pub fn from_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// `x xᵀ`.
    pub fn outer(x: &Vector) -> Self {
        Self(x * x.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn symmetrize(&mut self) {
        let n = self.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.0[(i, j)] + self.0[(j, i)]);
                self.0[(i, j)] = avg;
                self.0[(j, i)] = avg;
            }
        }
    }

    /// `A ← A + scale·x xᵀ`, then symmetrize.
    pub fn rank_one_update(&mut self, x: &Vector, scale: f64) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        self.0.ger(scale, x, x, 1.0);
        self.symmetrize();
        Ok(())
    }

    /// `A ← A + s·I`.
    pub fn add_identity(&mut self, s: f64) {
        for i in 0..self.dim() {
            self.0[(i, i)] += s;
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector> {
        check_dim(self.dim(), v.len())?;
        Ok(&self.0 * v)
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(x.dot(&(&self.0 * x)))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        if !self.is_finite() {
            return Err(Error::NonFinite("matrix"));
        }
        Cholesky::new(self.0.clone()).ok_or(Error::NotPositiveDefinite)
    }

    /// Inverse of an SPD matrix via Cholesky.
    pub fn spd_inverse(&self) -> Result<Self> {
        let mut inv = Self(self.cholesky()?.inverse());
        inv.symmetrize();
        Ok(inv)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimMismatch { expected, got });
    }
    Ok(())
}

/// Solves `A z = v` for SPD `A`.
pub fn spd_solve(a: &SymMatrix, v: &Vector) -> Result<Vector> {
    check_dim(a.dim(), v.len())?;
    Ok(a.cholesky()?.solve(v))
}

/// Solves `A Z = B` for SPD `A` and a matrix right-hand side.
pub fn spd_solve_matrix(a: &SymMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim(a.dim(), rhs.nrows())?;
    Ok(a.cholesky()?.solve(rhs))
}

/// `ln det A` for SPD `A`.
pub fn logdet(a: &SymMatrix) -> Result<f64> {
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    Ok((0..a.dim()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_extremes(a: &SymMatrix) -> Result<(f64, f64)> {
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    if a.dim() == 1 {
        return Ok((a[(0, 0)], a[(0, 0)]));
    }
    let eig = SymmetricEigen::new(a.0.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}
