use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest matrix the dense oracle path will factor by default.
pub const DEFAULT_ORACLE_CAP: usize = 2000;

/// Full spectral decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseEig {
    pub eigenvalues: DVector<f64>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl DenseEig {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn matrix_function(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.eigenvectors.nrows(), self.eigenvectors.ncols(), |i, j| {
            self.eigenvectors[(i, j)] * f(self.eigenvalues[j])
        });
        scaled * self.eigenvectors.transpose()
    }
}

pub fn dense_eig_sym(a: &DMatrix<f64>) -> Result<DenseEig> {
    dense_eig_sym_capped(a, DEFAULT_ORACLE_CAP)
}

/// Symmetric eigendecomposition, rejecting non-symmetric input and `n > cap`.
pub fn dense_eig_sym_capped(a: &DMatrix<f64>, cap: usize) -> Result<DenseEig> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if n > cap {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a[(i, j)] - a[(j, i)]).abs();
            if diff > 1e-10 * scale {
                return Err(Error::NotSymmetric { row: i, col: j, diff });
            }
        }
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(DenseEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues of the generalized problem `R v = λ C v` (dense, ascending).
pub fn generalized_eigenvalues(r: &DMatrix<f64>, c: &DMatrix<f64>, cap: usize) -> Result<Vec<f64>> {
    let chol = nalgebra::Cholesky::new(c.clone()).ok_or(Error::NotPositiveDefinite {
        row: 0,
        pivot: f64::NAN,
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(c.nrows(), c.nrows()))
        .expect("triangular factor is invertible");
    let s = &linv * r * linv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    Ok(dense_eig_sym_capped(&s, cap)?.eigenvalues.iter().copied().collect())
}
