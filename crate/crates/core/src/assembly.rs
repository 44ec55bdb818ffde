//! Linear surface finite element matrices and the operator `S = √C⁻¹ R √C⁻ᵀ`.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientField;
use crate::error::{check_len, Error, Result};
use crate::linalg::{cholesky_with, CholeskyFactor, LinearOperator, Ordering, SparseMatrix};
use crate::mesh::{Point, SurfaceMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMode {
    /// Exact P1 mass matrix, square root by sparse Cholesky.
    Consistent,
    /// Row-sum lumped (diagonal) mass, square root taken entrywise.
    Lumped,
}

impl MassMode {
    /// Cholesky for curves, lumping for surfaces.
    pub fn default_for(dim: usize) -> Self {
        if dim == 1 {
            MassMode::Consistent
        } else {
            MassMode::Lumped
        }
    }
}

/// Assembled mass and stiffness matrices with a square root of the mass and
/// an interval `[lambda_min, lambda_max]` containing the spectrum of `S`.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    diffusion: Option<SparseMatrix>,
    sqrt_mass: CholeskyFactor,
    mass_mode: MassMode,
    dim: usize,
    potential_max: f64,
    lambda_min: f64,
    lambda_max: f64,
    mesh_size: Option<f64>,
}

/// Per-element data shared by the mass and stiffness kernels.
struct Element {
    measure: f64,
    /// Gradients of the nodal basis functions (tangent to the element).
    grads: [Point; 3],
    /// Projector onto the element's tangent space.
    projector: Matrix3<f64>,
}

fn element(mesh: &SurfaceMesh, i: usize) -> Result<Element> {
    let s = mesh.simplex(i);
    let p = |k: usize| mesh.vertices()[s[k]];
    match mesh.dim() {
        1 => {
            let e = p(1) - p(0);
            let len = e.norm();
            if !(len > 0.0) {
                return Err(Error::DegenerateSimplex { index: i, measure: len });
            }
            let t = e / len;
            Ok(Element {
                measure: len,
                grads: [-t / len, t / len, Point::zeros()],
                projector: t * t.transpose(),
            })
        }
        _ => {
            let n = (p(1) - p(0)).cross(&(p(2) - p(0)));
            let n2 = n.norm_squared();
            if !(n2 > 0.0) {
                return Err(Error::DegenerateSimplex { index: i, measure: 0.0 });
            }
            let grads = [
                n.cross(&(p(2) - p(1))) / n2,
                n.cross(&(p(0) - p(2))) / n2,
                n.cross(&(p(1) - p(0))) / n2,
            ];
            let nu = n / n2.sqrt();
            Ok(Element {
                measure: 0.5 * n2.sqrt(),
                grads,
                projector: Matrix3::identity() - nu * nu.transpose(),
            })
        }
    }
}

/// Consistent element mass entry for P1 simplices of dimension `dim`.
fn mass_entry(dim: usize, measure: f64, a: usize, b: usize) -> f64 {
    let denom = ((dim + 1) * (dim + 2)) as f64;
    measure * if a == b { 2.0 } else { 1.0 } / denom
}

/// Consistent or lumped mass matrix of a mesh.
pub fn mass_matrix(mesh: &SurfaceMesh, mode: MassMode) -> Result<SparseMatrix> {
    let k = mesh.dim() + 1;
    let n = mesh.n_vertices();
    match mode {
        MassMode::Lumped => {
            let mut diag = vec![0.0; n];
            for i in 0..mesh.n_simplices() {
                let share = mesh.simplex_measure(i) / k as f64;
                for &v in mesh.simplex(i) {
                    diag[v] += share;
                }
            }
            Ok(SparseMatrix::from_diagonal(&diag))
        }
        MassMode::Consistent => {
            let mut t = Vec::with_capacity(mesh.n_simplices() * k * k);
            for i in 0..mesh.n_simplices() {
                let m = mesh.simplex_measure(i);
                let s = mesh.simplex(i);
                for a in 0..k {
                    for b in 0..k {
                        t.push((s[a], s[b], mass_entry(mesh.dim(), m, a, b)));
                    }
                }
            }
            SparseMatrix::from_triplets(n, n, t)
        }
    }
}

/// Assembles `C`, `R`, `√C` and the spectral interval of `S` for `mesh` and `coeffs`.
///
/// `D` and `V` are evaluated once per element at the closest-point projection
/// of the element centroid, and `D` is projected onto the element tangent
/// space. The potential term reuses the element mass block (lumped in
/// [`MassMode::Lumped`]), so `R ≥ V₋ C` holds in both modes.
pub fn assemble(mesh: &SurfaceMesh, coeffs: &CoefficientField, mode: MassMode) -> Result<AssembledOperator> {
    let ordering = match (mesh.dim(), mode) {
        (2, MassMode::Consistent) => Ordering::ReverseCuthillMcKee,
        _ => Ordering::Natural,
    };
    assemble_with_ordering(mesh, coeffs, mode, ordering)
}

pub fn assemble_with_ordering(
    mesh: &SurfaceMesh,
    coeffs: &CoefficientField,
    mode: MassMode,
    ordering: Ordering,
) -> Result<AssembledOperator> {
    let dim = mesh.dim();
    let k = dim + 1;
    let n = mesh.n_vertices();
    let mut diffusion_t = Vec::with_capacity(mesh.n_simplices() * k * k);
    let mut potential_t = Vec::with_capacity(mesh.n_simplices() * k * k);
    let mut potential_max = f64::NEG_INFINITY;

    for i in 0..mesh.n_simplices() {
        let el = element(mesh, i)?;
        let s = mesh.simplex(i);
        let x = mesh.closest_point(&mesh.simplex_centroid(i))?;
        let d = el.projector * coeffs.diffusion(&x) * el.projector;
        let v = coeffs.potential(&x);
        potential_max = potential_max.max(v);
        for a in 0..k {
            for b in 0..k {
                let kab = el.measure * el.grads[a].dot(&(d * el.grads[b]));
                diffusion_t.push((s[a], s[b], kab));
            }
            match mode {
                MassMode::Consistent => {
                    for b in 0..k {
                        potential_t.push((s[a], s[b], v * mass_entry(dim, el.measure, a, b)));
                    }
                }
                MassMode::Lumped => potential_t.push((s[a], s[a], v * el.measure / k as f64)),
            }
        }
    }
    let diffusion = SparseMatrix::from_triplets(n, n, diffusion_t)?;
    let potential = SparseMatrix::from_triplets(n, n, potential_t)?;
    let stiffness = diffusion.add_scaled(&potential, 1.0)?;
    let mass = mass_matrix(mesh, mode)?;
    let sqrt_mass = match mode {
        MassMode::Lumped => CholeskyFactor::from_lumped(&mass.diagonal())?,
        MassMode::Consistent => cholesky_with(&mass, ordering)?,
    };
    let mut op = AssembledOperator {
        mass,
        stiffness,
        diffusion: Some(diffusion),
        sqrt_mass,
        mass_mode: mode,
        dim,
        potential_max,
        lambda_min: coeffs.v_minus(),
        lambda_max: 0.0,
        mesh_size: Some(mesh.nominal_size()),
    };
    op.lambda_max = op.gershgorin_bound();
    Ok(op)
}

impl AssembledOperator {
    /// Builds an operator from given matrices; `lambda_min` is the caller's lower spectral bound.
    ///
    /// Lumped mode requires a diagonal `mass`.
    pub fn from_parts(
        mass: SparseMatrix,
        stiffness: SparseMatrix,
        mode: MassMode,
        dim: usize,
        lambda_min: f64,
    ) -> Result<Self> {
        check_len(mass.n_rows(), stiffness.n_rows())?;
        mass.check_symmetric(1e-12)?;
        stiffness.check_symmetric(1e-12)?;
        let sqrt_mass = match mode {
            MassMode::Lumped => {
                if mass.nnz() != mass.n_rows() || (0..mass.n_rows()).any(|i| mass.row(i).0 != [i]) {
                    return Err(Error::InvalidSparse("lumped mass must be diagonal".into()));
                }
                CholeskyFactor::from_lumped(&mass.diagonal())?
            }
            MassMode::Consistent => cholesky_with(&mass, Ordering::Natural)?,
        };
        let mut op = Self {
            mass,
            stiffness,
            diffusion: None,
            sqrt_mass,
            mass_mode: mode,
            dim,
            potential_max: 0.0,
            lambda_min,
            lambda_max: 0.0,
            mesh_size: None,
        };
        op.lambda_max = op.gershgorin_bound();
        Ok(op)
    }

    pub fn n(&self) -> usize {
        self.mass.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Mass matrix `C` (diagonal in lumped mode).
    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    /// Stiffness matrix `R` including the potential term.
    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn sqrt_mass(&self) -> &CholeskyFactor {
        &self.sqrt_mass
    }

    pub fn mass_mode(&self) -> MassMode {
        self.mass_mode
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Nominal mesh size `h` of the mesh the operator was assembled on.
    pub fn mesh_size(&self) -> Option<f64> {
        self.mesh_size
    }

    pub fn with_mesh_size(mut self, h: f64) -> Self {
        self.mesh_size = Some(h);
        self
    }

    /// Replaces the spectral interval, e.g. to study a deliberately wrong one.
    pub fn with_interval(mut self, lambda_min: f64, lambda_max: f64) -> Self {
        self.lambda_min = lambda_min;
        self.lambda_max = lambda_max;
        self
    }

    /// Upper bound on the spectrum of `S` from Gershgorin discs.
    ///
    /// Lumped: `max_i Σ_j |R_ij| / C_ii`, the Gershgorin bound of `C⁻¹R`.
    /// Consistent: with `c` the lumped diagonal, `xᵀKx ≤ G xᵀ diag(c) x ≤ (d+2) G xᵀCx`
    /// where `G = max_i Σ_j |K_ij| / c_i`, since every P1 element mass block
    /// dominates `1/(d+2)` of its lumped block; the potential part adds at
    /// most `max V`.
    pub fn gershgorin_bound(&self) -> f64 {
        let lumped = self.mass.row_sums();
        let disc = |m: &SparseMatrix| {
            m.row_abs_sums()
                .iter()
                .zip(&lumped)
                .map(|(r, c)| r / c)
                .fold(0.0, f64::max)
        };
        match self.mass_mode {
            MassMode::Lumped => disc(&self.stiffness),
            MassMode::Consistent => {
                let factor = (self.dim + 2) as f64;
                match &self.diffusion {
                    Some(k) => factor * disc(k) + self.potential_max.max(0.0),
                    None => factor * disc(&self.stiffness),
                }
            }
        }
    }

    /// `S x = √C⁻¹ R √C⁻ᵀ x`, without forming `S`.
    pub fn apply_s(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.sqrt_mass.solve_upper(x)?;
        let z = self.stiffness.spmv(&y)?;
        self.sqrt_mass.solve_lower(&z)
    }

    /// Dense `S` built column by column from [`Self::apply_s`].
    pub fn dense_s(&self, cap: usize) -> Result<DMatrix<f64>> {
        let n = self.n();
        if n > cap {
            return Err(Error::OracleCapExceeded { n, cap });
        }
        let mut s = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply_s(&e)?;
            s.set_column(j, &nalgebra::DVector::from_vec(col));
            e[j] = 0.0;
        }
        Ok(s)
    }
}

impl LinearOperator for AssembledOperator {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.n(), y.len())?;
        y.copy_from_slice(&self.apply_s(x)?);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::preset_matern;
    use crate::mesh::{generate_circle, generate_icosphere, SurfaceKind};

    #[test]
    fn one_by_one_bound() {
        let op = AssembledOperator::from_parts(
            SparseMatrix::from_diagonal(&[2.0]),
            SparseMatrix::from_diagonal(&[6.0]),
            MassMode::Lumped,
            1,
            1.0,
        )
        .unwrap();
        assert!((op.lambda_max() - 3.0).abs() < 1e-15);
        assert!((op.dense_s(10).unwrap()[(0, 0)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_bound_is_exact() {
        let op = AssembledOperator::from_parts(
            SparseMatrix::from_diagonal(&[2.0, 1.0, 4.0]),
            SparseMatrix::from_diagonal(&[6.0, 5.0, 4.0]),
            MassMode::Lumped,
            1,
            1.0,
        )
        .unwrap();
        assert!((op.lambda_max() - 5.0).abs() < 1e-14);
        let x = [1.0, -2.0, 0.5];
        let y = op.apply_s(&x).unwrap();
        for (u, v) in y.iter().zip([3.0, -10.0, 0.5]) {
            assert!((u - v).abs() < 1e-14);
        }
        assert_eq!(op.apply_s(&[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn circle_one_dimensional_stencil() {
        let mesh = generate_circle(2).unwrap();
        let kappa2 = 3.0;
        let op = assemble(&mesh, &preset_matern(kappa2, 1), MassMode::Consistent).unwrap();
        let s = mesh.simplex_measure(0);
        let c = op.mass();
        let r = op.stiffness();
        // diagonal: 2/s + κ²·2s/3, neighbours: -1/s + κ²·s/6
        assert!((r.get(0, 0) - (2.0 / s + kappa2 * 2.0 * s / 3.0)).abs() < 1e-13);
        assert!((r.get(0, 1) - (-1.0 / s + kappa2 * s / 6.0)).abs() < 1e-13);
        assert!((c.get(3, 4) - s / 6.0).abs() < 1e-15);
        assert_eq!(r.get(0, 4), 0.0);
    }

    #[test]
    fn flat_triangle_mass_rows() {
        // unit-area triangle
        for a in 0..3 {
            let row: f64 = (0..3).map(|b| mass_entry(2, 1.0, a, b)).sum();
            assert!((row - 1.0 / 3.0).abs() < 1e-16);
        }
    }

    #[test]
    fn area_identity_and_kernel() {
        for mesh in [generate_circle(5).unwrap(), generate_icosphere(2).unwrap()] {
            let zero_v = CoefficientField::new(
                "laplace",
                mesh.dim(),
                {
                    let d = mesh.dim();
                    move |x| crate::coefficients::tangent_projector(x, d)
                },
                |_| 0.0,
                0.0,
                0.0,
            );
            for mode in [MassMode::Consistent, MassMode::Lumped] {
                let op = assemble(&mesh, &zero_v, mode).unwrap();
                let area = mesh.total_measure();
                assert!((op.mass().total() - area).abs() <= 1e-12 * area);
                let r1 = op.stiffness().spmv(&vec![1.0; mesh.n_vertices()]).unwrap();
                let norm = op.stiffness().max_abs();
                assert!(r1.iter().all(|v| v.abs() <= 1e-10 * norm));
            }
        }
        assert_eq!(generate_icosphere(2).unwrap().kind(), SurfaceKind::UnitSphere);
    }
}
