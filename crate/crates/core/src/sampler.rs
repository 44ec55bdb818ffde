//! White noise, Galerkin-Chebyshev field samples, the dense spectral oracle
//! sampler and noise projection between nested mesh levels.
//!
//! Noise is drawn from ChaCha20 seeded with `seed_from_u64(seed)` and
//! transformed to standard normals by the ziggurat sampler of `rand_distr`
//! (`StandardNormal`); both are platform independent, so a `(seed, n)` pair
//! always yields the same bits.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::assembly::AssembledOperator;
use crate::chebyshev::{ChebyshevPoly, SpectralDensity};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dense_eig_sym_capped, CholeskyFactor, SparseMatrix};
use crate::mesh::Prolongation;

/// Vector of independent standard normal nodal noise coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteNoise {
    pub values: Vec<f64>,
    pub seed: u64,
    pub level: Option<u32>,
}

/// Nodal weights of one field sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub nodal_weights: Vec<f64>,
    pub density: String,
    /// Active polynomial degree, `None` for the exact spectral sampler.
    pub chopped_degree: Option<usize>,
}

impl FieldSample {
    pub fn len(&self) -> usize {
        self.nodal_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodal_weights.is_empty()
    }
}

/// `n` i.i.d. standard normal values, bit-reproducible from `(seed, n)`.
pub fn white_noise(n: usize, seed: u64) -> WhiteNoise {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    WhiteNoise {
        values: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        seed,
        level: None,
    }
}

impl WhiteNoise {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            values,
            seed: 0,
            level: None,
        }
    }

    pub fn at_level(mut self, level: u32) -> Self {
        self.level = Some(level);
        self
    }
}

/// Galerkin-Chebyshev sample `√C⁻ᵀ P(S) W`.
pub fn sample_field(op: &AssembledOperator, poly: &ChebyshevPoly, noise: &WhiteNoise) -> Result<FieldSample> {
    check_len(op.n(), noise.values.len())?;
    let (lo, hi) = poly.interval();
    if lo > op.lambda_min() || hi < op.lambda_max() {
        return Err(Error::IntervalTooSmall {
            poly_lo: lo,
            poly_hi: hi,
            op_lo: op.lambda_min(),
            op_hi: op.lambda_max(),
        });
    }
    let pw = poly.apply(op, &noise.values)?;
    Ok(FieldSample {
        nodal_weights: op.sqrt_mass().solve_upper(&pw)?,
        density: String::new(),
        chopped_degree: Some(poly.active_degree()),
    })
}

/// Same as [`sample_field`] with the density label recorded.
pub fn sample_field_labeled(
    op: &AssembledOperator,
    poly: &ChebyshevPoly,
    noise: &WhiteNoise,
    density: &SpectralDensity,
) -> Result<FieldSample> {
    let mut s = sample_field(op, poly, noise)?;
    s.density = density.label();
    Ok(s)
}

/// `γ(S)` from the dense eigendecomposition of `S`.
pub fn dense_gamma_s(op: &AssembledOperator, density: &SpectralDensity, cap: usize) -> Result<DMatrix<f64>> {
    let s = op.dense_s(cap)?;
    let s = (&s + s.transpose()) * 0.5;
    let eig = dense_eig_sym_capped(&s, cap)?;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if !density.eval(lambda).is_finite() {
            return Err(Error::Evaluation {
                label: density.label(),
                node: i,
                lambda,
            });
        }
    }
    Ok(eig.matrix_function(|l| density.eval(l)))
}

/// Exact SFEM-Galerkin sample `√C⁻ᵀ V diag(γ(Λ)) Vᵀ W` by dense eigendecomposition.
pub fn exact_sample(
    op: &AssembledOperator,
    density: &SpectralDensity,
    noise: &WhiteNoise,
    cap: usize,
) -> Result<FieldSample> {
    check_len(op.n(), noise.values.len())?;
    let g = dense_gamma_s(op, density, cap)?;
    let gw = &g * DVector::from_column_slice(&noise.values);
    Ok(FieldSample {
        nodal_weights: op.sqrt_mass().solve_upper(gw.as_slice())?,
        density: density.label(),
        chopped_degree: None,
    })
}

/// `B⁻ᵀ A B⁻¹` for a square root `B` and symmetric dense `A`.
fn sandwich_inverse(sqrt: &CholeskyFactor, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut x = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = sqrt.solve_upper(a.column(j).as_slice())?;
        x.set_column(j, &DVector::from_vec(col));
    }
    let xt = x.transpose();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = sqrt.solve_upper(xt.column(j).as_slice())?;
        out.set_column(j, &DVector::from_vec(col));
    }
    Ok(out)
}

/// Covariance of the exact Galerkin nodal weights, `√C⁻ᵀ γ(S)² √C⁻¹`.
pub fn galerkin_covariance(op: &AssembledOperator, density: &SpectralDensity, cap: usize) -> Result<DMatrix<f64>> {
    let g = dense_gamma_s(op, density, cap)?;
    sandwich_inverse(op.sqrt_mass(), &(&g * &g))
}

/// Matrix whose column `j` is the Chebyshev sample driven by the unit noise `e_j`.
pub fn sample_matrix(op: &AssembledOperator, poly: &ChebyshevPoly, cap: usize) -> Result<DMatrix<f64>> {
    let n = op.n();
    if n > cap {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    let cols = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            sample_field(op, poly, &WhiteNoise::from_values(e)).map(|s| s.nodal_weights)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
}

/// Coarse noise `√C_c⁻¹ Pᵀ √C_f W_f`.
pub fn project_noise(
    fine: &WhiteNoise,
    p: &Prolongation,
    sqrt_fine: &CholeskyFactor,
    sqrt_coarse: &CholeskyFactor,
) -> Result<WhiteNoise> {
    check_len(p.fine_n, fine.values.len())?;
    check_len(p.fine_n, sqrt_fine.dim())?;
    check_len(p.coarse_n, sqrt_coarse.dim())?;
    let functionals = p.restrict(&sqrt_fine.mul_lower(&fine.values)?)?;
    Ok(WhiteNoise {
        values: sqrt_coarse.solve_lower(&functionals)?,
        seed: fine.seed,
        level: fine.level.map(|l| l.saturating_sub(1)),
    })
}

/// Column `j` of `√C_c⁻¹ Pᵀ C_f P √C_c⁻ᵀ`, the covariance of projected noise.
fn projected_covariance_column(
    p: &Prolongation,
    mass_fine: &SparseMatrix,
    sqrt_coarse: &CholeskyFactor,
    j: usize,
) -> Result<Vec<f64>> {
    let mut e = vec![0.0; p.coarse_n];
    e[j] = 1.0;
    let u = p.apply(&sqrt_coarse.solve_upper(&e)?)?;
    sqrt_coarse.solve_lower(&p.restrict(&mass_fine.spmv(&u)?)?)
}

/// `‖√C_c⁻¹ Pᵀ C_f P √C_c⁻ᵀ − I‖_max`, computed column by column.
///
/// Zero when the coarse finite element space is a subspace of the fine one.
pub fn projection_defect(p: &Prolongation, mass_fine: &SparseMatrix, sqrt_coarse: &CholeskyFactor) -> Result<f64> {
    check_len(p.fine_n, mass_fine.n_rows())?;
    check_len(p.coarse_n, sqrt_coarse.dim())?;
    (0..p.coarse_n)
        .into_par_iter()
        .map(|j| {
            let col = projected_covariance_column(p, mass_fine, sqrt_coarse, j)?;
            Ok(col
                .iter()
                .enumerate()
                .map(|(i, v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Dense covariance matrix of projected noise.
pub fn projected_covariance(
    p: &Prolongation,
    mass_fine: &SparseMatrix,
    sqrt_coarse: &CholeskyFactor,
    cap: usize,
) -> Result<DMatrix<f64>> {
    let n = p.coarse_n;
    if n > cap {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    let mut x = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = projected_covariance_column(p, mass_fine, sqrt_coarse, j)?;
        x.set_column(j, &DVector::from_vec(col));
    }
    Ok(x)
}

/// Projected noise with its covariance defect removed by the symmetric inverse square root
/// `X^{-1/2}` of the projected covariance `X` (dense; sensitivity studies only).
pub fn whiten_projected(
    noise: &WhiteNoise,
    p: &Prolongation,
    mass_fine: &SparseMatrix,
    sqrt_coarse: &CholeskyFactor,
    cap: usize,
) -> Result<WhiteNoise> {
    check_len(p.coarse_n, noise.values.len())?;
    let x = projected_covariance(p, mass_fine, sqrt_coarse, cap)?;
    let x = (&x + x.transpose()) * 0.5;
    let eig = dense_eig_sym_capped(&x, cap)?;
    if let Some(i) = eig.eigenvalues.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite {
            row: i,
            pivot: eig.eigenvalues[i],
        });
    }
    let w = eig.matrix_function(|l| l.powf(-0.5)) * DVector::from_column_slice(&noise.values);
    Ok(WhiteNoise {
        values: w.as_slice().to_vec(),
        ..noise.clone()
    })
}

/// Unbiased sample covariance of nodal weights.
pub fn empirical_covariance(samples: &[FieldSample]) -> Result<DMatrix<f64>> {
    if samples.len() < 2 {
        return Err(Error::NotEnoughPoints {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = samples[0].len();
    for s in samples {
        check_len(n, s.len())?;
    }
    let m = samples.len() as f64;
    let mean: Vec<f64> = (0..n)
        .map(|i| samples.iter().map(|s| s.nodal_weights[i]).sum::<f64>() / m)
        .collect();
    let mut cov = DMatrix::zeros(n, n);
    for s in samples {
        let d = DVector::from_iterator(n, s.nodal_weights.iter().zip(&mean).map(|(x, mu)| x - mu));
        cov.ger(1.0, &d, &d, 1.0);
    }
    Ok(cov / (m - 1.0))
}
