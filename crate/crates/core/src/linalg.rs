//! Dense symmetric linear algebra used by the ellipsoidal sets and the
//! closed-form oracles.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{RcmError, Result};

pub type Vector = DVector<f64>;

/// Eigenvalues below this are treated as rounding noise and clamped to zero.
pub const PSD_CLAMP: f64 = 1e-10;

const SYMMETRY_RTOL: f64 = 1e-12;

/// A real symmetric matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
            return Err(RcmError::InvalidMatrix);
        }
        let scale = m.amax().max(1.0);
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                    return Err(RcmError::InvalidMatrix);
                }
            }
        }
        // Exact symmetry from here on.
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
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
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl std::ops::Add for &SymMatrix {
    type Output = SymMatrix;

    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

/// Eigendecomposition `A = V diag(λ) Vᵀ` with eigenvalues in ascending order.
/// Eigenvectors are the columns of the returned matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: Vector,
    pub eigenvectors: DMatrix<f64>,
}

pub fn sym_eig(a: &SymMatrix) -> SymEigen {
    let n = a.dim();
    let eig = nalgebra::SymmetricEigen::new(a.0.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SymEigen {
        eigenvalues,
        eigenvectors,
    }
}

/// Symmetric PSD square root. Eigenvalues in `[-PSD_CLAMP, 0)` are clamped.
pub fn psd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(a);
    let floor = PSD_CLAMP * a.amax().max(1.0);
    if let Some(&low) = eig.eigenvalues.iter().find(|&&l| l < -floor) {
        return Err(RcmError::NotPsd(low));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok(SymMatrix((&s + s.transpose()) * 0.5))
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &SymMatrix, b: &Vector) -> Result<Vector> {
    if b.len() != a.dim() {
        return Err(RcmError::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
        });
    }
    let eig = sym_eig(a);
    if a.dim() > 0 && eig.eigenvalues[0] <= 1e-12 * a.amax().max(1.0) {
        return Err(RcmError::NotSpd);
    }
    let chol = nalgebra::Cholesky::new(a.0.clone()).ok_or(RcmError::NotSpd)?;
    Ok(chol.solve(b))
}

/// Orthonormal basis of the orthogonal complement of a unit vector, as the
/// columns of a `d × (d-1)` matrix.
pub fn orthogonal_complement(u: &Vector) -> DMatrix<f64> {
    let d = u.len();
    if d <= 1 {
        return DMatrix::zeros(d, 0);
    }
    // Householder reflection mapping e_k to ±u; its other columns span u⊥.
    let k = u.iamax();
    let sign = if u[k] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = u.clone();
    v[k] += sign;
    let vv = v.norm_squared();
    let mut basis = DMatrix::zeros(d, d - 1);
    let mut col = 0;
    for j in (0..d).filter(|&j| j != k) {
        let mut e = Vector::zeros(d);
        e[j] = 1.0;
        let h = &e - &v * (2.0 * v[j] / vv);
        basis.set_column(col, &h);
        col += 1;
    }
    basis
}
