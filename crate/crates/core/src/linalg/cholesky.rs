use std::collections::VecDeque;

use super::SparseMatrix;
use crate::error::{check_len, Error, Result};

/// Fill-reducing orderings available to [`cholesky_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    /// Factor in the given vertex order (banded for the circle).
    #[default]
    Natural,
    /// Reverse Cuthill-McKee bandwidth reduction.
    ReverseCuthillMcKee,
}

/// A square root `B` of an SPD matrix, `A = B Bᵀ`.
///
/// For `SparseLower` with a permutation `p`, `B = Qᵀ L` where `(Qx)_i = x[p[i]]`
/// and `L` is the lower Cholesky factor of the permuted matrix `A[p, p]`.
#[derive(Debug, Clone)]
pub enum CholeskyFactor {
    SparseLower {
        lower: SparseMatrix,
        perm: Option<Vec<usize>>,
    },
    Diagonal {
        diag_sqrt: Vec<f64>,
    },
}

impl CholeskyFactor {
    /// Diagonal square root of a lumped (diagonal) mass.
    pub fn from_lumped(diag: &[f64]) -> Result<Self> {
        if let Some((row, &pivot)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
            return Err(Error::NotPositiveDefinite { row, pivot });
        }
        Ok(Self::Diagonal {
            diag_sqrt: diag.iter().map(|d| d.sqrt()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::SparseLower { lower, .. } => lower.n_rows(),
            Self::Diagonal { diag_sqrt } => diag_sqrt.len(),
        }
    }

    /// `B⁻¹ b`.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), b.len())?;
        match self {
            Self::Diagonal { diag_sqrt } => Ok(b.iter().zip(diag_sqrt).map(|(x, d)| x / d).collect()),
            Self::SparseLower { lower, perm } => {
                let mut x = permute(b, perm.as_deref());
                forward_substitute(lower, &mut x);
                Ok(x)
            }
        }
    }

    /// `B⁻ᵀ b`.
    pub fn solve_upper(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), b.len())?;
        match self {
            Self::Diagonal { diag_sqrt } => Ok(b.iter().zip(diag_sqrt).map(|(x, d)| x / d).collect()),
            Self::SparseLower { lower, perm } => {
                let mut x = b.to_vec();
                back_substitute(lower, &mut x);
                Ok(unpermute(&x, perm.as_deref()))
            }
        }
    }

    /// `B x`.
    pub fn mul_lower(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        match self {
            Self::Diagonal { diag_sqrt } => Ok(x.iter().zip(diag_sqrt).map(|(x, d)| x * d).collect()),
            Self::SparseLower { lower, perm } => Ok(unpermute(&lower.spmv(x)?, perm.as_deref())),
        }
    }

    /// `Bᵀ x`.
    pub fn mul_upper(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        match self {
            Self::Diagonal { diag_sqrt } => Ok(x.iter().zip(diag_sqrt).map(|(x, d)| x * d).collect()),
            Self::SparseLower { lower, perm } => lower.spmv_transpose(&permute(x, perm.as_deref())),
        }
    }

    /// `B Bᵀ` as a sparse matrix, used to check the factorization.
    pub fn reconstruct(&self) -> SparseMatrix {
        match self {
            Self::Diagonal { diag_sqrt } => {
                SparseMatrix::from_diagonal(&diag_sqrt.iter().map(|d| d * d).collect::<Vec<_>>())
            }
            Self::SparseLower { lower, perm } => {
                let llt = lower.matmul(&lower.transpose()).expect("square factor");
                match perm {
                    None => llt,
                    Some(p) => {
                        let mut t = Vec::with_capacity(llt.nnz());
                        for i in 0..llt.n_rows() {
                            let (cols, vals) = llt.row(i);
                            t.extend(cols.iter().zip(vals).map(|(&j, &v)| (p[i], p[j], v)));
                        }
                        SparseMatrix::from_triplets(llt.n_rows(), llt.n_cols(), t).expect("permutation")
                    }
                }
            }
        }
    }

    /// Number of stored entries in the factor.
    pub fn nnz(&self) -> usize {
        match self {
            Self::SparseLower { lower, .. } => lower.nnz(),
            Self::Diagonal { diag_sqrt } => diag_sqrt.len(),
        }
    }
}

fn permute(b: &[f64], perm: Option<&[usize]>) -> Vec<f64> {
    match perm {
        None => b.to_vec(),
        Some(p) => p.iter().map(|&k| b[k]).collect(),
    }
}

fn unpermute(z: &[f64], perm: Option<&[usize]>) -> Vec<f64> {
    match perm {
        None => z.to_vec(),
        Some(p) => {
            let mut x = vec![0.0; z.len()];
            for (i, &k) in p.iter().enumerate() {
                x[k] = z[i];
            }
            x
        }
    }
}

/// Solves `L x = b` in place; the diagonal is the last entry of each row.
fn forward_substitute(lower: &SparseMatrix, x: &mut [f64]) {
    for i in 0..lower.n_rows() {
        let (cols, vals) = lower.row(i);
        let last = cols.len() - 1;
        let mut s = x[i];
        for (&j, &v) in cols[..last].iter().zip(&vals[..last]) {
            s -= v * x[j];
        }
        x[i] = s / vals[last];
    }
}

/// Solves `Lᵀ x = b` in place.
fn back_substitute(lower: &SparseMatrix, x: &mut [f64]) {
    for i in (0..lower.n_rows()).rev() {
        let (cols, vals) = lower.row(i);
        let last = cols.len() - 1;
        x[i] /= vals[last];
        let xi = x[i];
        for (&j, &v) in cols[..last].iter().zip(&vals[..last]) {
            x[j] -= v * xi;
        }
    }
}

/// Sparse Cholesky factorization in natural order.
pub fn cholesky(a: &SparseMatrix) -> Result<CholeskyFactor> {
    cholesky_with(a, Ordering::Natural)
}

/// Sparse up-looking Cholesky factorization of a symmetric positive definite matrix.
pub fn cholesky_with(a: &SparseMatrix, ordering: Ordering) -> Result<CholeskyFactor> {
    a.check_symmetric(1e-12)?;
    let perm = match ordering {
        Ordering::Natural => None,
        Ordering::ReverseCuthillMcKee => Some(reverse_cuthill_mckee(a)),
    };
    let lower = match &perm {
        None => factor(a)?,
        Some(p) => factor(&symmetric_permute(a, p))?,
    };
    Ok(CholeskyFactor::SparseLower { lower, perm })
}

fn symmetric_permute(a: &SparseMatrix, p: &[usize]) -> SparseMatrix {
    let mut inv = vec![0; p.len()];
    for (i, &k) in p.iter().enumerate() {
        inv[k] = i;
    }
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        t.extend(cols.iter().zip(vals).map(|(&j, &v)| (inv[i], inv[j], v)));
    }
    SparseMatrix::from_triplets(a.n_rows(), a.n_cols(), t).expect("permutation")
}

/// Elimination tree of a symmetric matrix (full storage).
fn elimination_tree(a: &SparseMatrix) -> Vec<Option<usize>> {
    let n = a.n_rows();
    let mut parent = vec![None; n];
    let mut ancestor: Vec<Option<usize>> = vec![None; n];
    for k in 0..n {
        for &i in a.row(k).0.iter().take_while(|&&i| i < k) {
            let mut cur = Some(i);
            while let Some(c) = cur.filter(|&c| c < k) {
                let next = ancestor[c];
                ancestor[c] = Some(k);
                if next.is_none() {
                    parent[c] = Some(k);
                }
                cur = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of L (columns < k) in topological order.
fn row_pattern(
    a: &SparseMatrix,
    k: usize,
    parent: &[Option<usize>],
    mark: &mut [usize],
    stack: &mut Vec<usize>,
    out: &mut Vec<usize>,
) {
    out.clear();
    mark[k] = k;
    for &i in a.row(k).0.iter().take_while(|&&i| i < k) {
        stack.clear();
        let mut j = i;
        while mark[j] != k {
            stack.push(j);
            mark[j] = k;
            j = parent[j].expect("etree path reaches k");
        }
        out.extend(stack.drain(..).rev());
    }
    // `out` is a concatenation of root-ward paths; ascending order is a valid
    // topological order for the elimination tree.
    out.sort_unstable();
}

fn factor(a: &SparseMatrix) -> Result<SparseMatrix> {
    let n = a.n_rows();
    let parent = elimination_tree(a);
    let mut mark = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut pattern = Vec::new();

    // Row-wise storage of L: row k holds columns in `pattern` order plus the diagonal.
    // Column access during the solve goes through per-column lists.
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut col_vals: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut diag = vec![0.0; n];
    let mut x = vec![0.0; n];

    let mut row_offsets = Vec::with_capacity(n + 1);
    row_offsets.push(0);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();

    for k in 0..n {
        row_pattern(a, k, &parent, &mut mark, &mut stack, &mut pattern);
        let (cols, vals) = a.row(k);
        let mut d = 0.0;
        for (&i, &v) in cols.iter().zip(vals) {
            if i < k {
                x[i] = v;
            } else if i == k {
                d = v;
            }
        }
        for &j in &pattern {
            let lkj = x[j] / diag[j];
            x[j] = 0.0;
            for (&r, &lv) in col_rows[j].iter().zip(&col_vals[j]) {
                x[r] -= lv * lkj;
            }
            d -= lkj * lkj;
            col_indices.push(j);
            values.push(lkj);
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { row: k, pivot: d });
        }
        let lkk = d.sqrt();
        diag[k] = lkk;
        col_indices.push(k);
        values.push(lkk);
        row_offsets.push(col_indices.len());
        // entries L[k, j] become part of column j for later rows
        let start = row_offsets[k];
        for p in start..row_offsets[k + 1] - 1 {
            let j = col_indices[p];
            col_rows[j].push(k);
            col_vals[j].push(values[p]);
        }
    }
    SparseMatrix::from_csr(n, n, row_offsets, col_indices, values)
}

/// Reverse Cuthill-McKee ordering over the adjacency graph of `a`.
fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut neighbors = Vec::new();
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("unvisited vertex remains");
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            neighbors.clear();
            neighbors.extend(a.row(v).0.iter().copied().filter(|&u| !visited[u]));
            neighbors.sort_by_key(|&u| (degree[u], u));
            for &u in &neighbors {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn sparse(rows: usize, data: &[f64]) -> SparseMatrix {
        SparseMatrix::from_dense(&DMatrix::from_row_slice(rows, rows, data), 0.0)
    }

    #[test]
    fn one_by_one() {
        let f = cholesky(&sparse(1, &[4.0])).unwrap();
        match &f {
            CholeskyFactor::SparseLower { lower, .. } => assert_eq!(lower.get(0, 0), 2.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn two_by_two_by_hand() {
        let f = cholesky(&sparse(2, &[4.0, 2.0, 2.0, 5.0])).unwrap();
        let CholeskyFactor::SparseLower { lower, .. } = &f else {
            unreachable!()
        };
        assert_eq!(lower.to_dense(), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]));
        assert_eq!(f.solve_lower(&[2.0, 3.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_solves() {
        let f = CholeskyFactor::Diagonal {
            diag_sqrt: vec![2.0, 4.0],
        };
        assert_eq!(f.solve_lower(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(f.solve_upper(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn indefinite_is_rejected() {
        let err = cholesky(&sparse(2, &[1.0, 2.0, 2.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { row: 1, .. }));
    }

    #[test]
    fn nonpositive_lumped_is_rejected() {
        assert!(CholeskyFactor::from_lumped(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn solve_dimension_mismatch() {
        let f = cholesky(&SparseMatrix::identity(3)).unwrap();
        assert!(f.solve_upper(&[1.0]).is_err());
    }

    #[test]
    fn cyclic_tridiagonal_with_both_orderings() {
        let n = 12;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            t.push((i, (i + 1) % n, 1.0));
            t.push(((i + 1) % n, i, 1.0));
        }
        let a = SparseMatrix::from_triplets(n, n, t).unwrap();
        for ord in [Ordering::Natural, Ordering::ReverseCuthillMcKee] {
            let f = cholesky_with(&a, ord).unwrap();
            let diff = f.reconstruct().add_scaled(&a, -1.0).unwrap();
            assert!(diff.frobenius_norm() <= 1e-14 * a.frobenius_norm());
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = f.solve_upper(&f.solve_lower(&b).unwrap()).unwrap();
            let r = a.spmv(&x).unwrap();
            for (u, v) in r.iter().zip(&b) {
                assert!((u - v).abs() < 1e-13);
            }
            let y = f.mul_lower(&f.mul_upper(&b).unwrap()).unwrap();
            for (u, v) in y.iter().zip(a.spmv(&b).unwrap()) {
                assert!((u - v).abs() < 1e-13);
            }
        }
    }
}
