//! Sparse and small-dense linear algebra kernels.
//!
//! [`SparseMatrix`] is the only sparse format (CSR, symmetric matrices stored
//! in full). [`CholeskyFactor`] represents any square root `B` with
//! `B Bᵀ = A`, either a sparse lower factor or a diagonal one for lumped
//! masses. The dense eigensolver backs the test oracles only.

mod cholesky;
mod dense;
mod sparse;

pub use cholesky::{cholesky, cholesky_with, CholeskyFactor, Ordering};
pub use dense::{
    dense_eig_sym, dense_eig_sym_capped, generalized_eigenvalues, DenseEig, DEFAULT_ORACLE_CAP,
};
pub use sparse::SparseMatrix;

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `‖a - b‖₂ / ‖b‖₂` (absolute difference when `b` is zero).
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let nb = norm2(b);
    if nb > 0.0 {
        diff / nb
    } else {
        diff
    }
}

/// A square linear map applied to vectors, such as the operator `S`.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> crate::Result<()>;

    fn apply(&self, x: &[f64]) -> crate::Result<Vec<f64>> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> crate::Result<()> {
        self.spmv_into(x, y)
    }
}

impl LinearOperator for nalgebra::DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> crate::Result<()> {
        crate::error::check_len(self.ncols(), x.len())?;
        crate::error::check_len(self.nrows(), y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..self.ncols()).map(|j| self[(i, j)] * x[j]).sum();
        }
        Ok(())
    }
}
