//! Galerkin-Chebyshev sampling of non-stationary Gaussian random fields on
//! triangulated closed curves and surfaces.
//!
//! A field `Z = γ(L) W` is discretized with linear surface finite elements:
//! the mass and stiffness matrices of the elliptic operator `L` define the
//! symmetric matrix `S = √C⁻¹ R √C⁻ᵀ`, and nodal weights are sampled as
//! `√C⁻ᵀ P(S) W` where `P` is a chopped Chebyshev interpolant of `γ` on a
//! spectral interval of `S`. No eigendecomposition is needed; the dense
//! spectral route is kept as an oracle for small meshes.
//!
//! ```no_run
//! use surfield::{assembly, chebyshev, coefficients, mesh, sampler};
//!
//! let mesh = mesh::generate_icosphere(3)?;
//! let coeffs = coefficients::preset_matern(10.0, 2);
//! let op = assembly::assemble(&mesh, &coeffs, assembly::MassMode::Lumped)?;
//! let density = chebyshev::SpectralDensity::Matern { kappa2: 10.0, alpha: 1.5 };
//! let poly = chebyshev::ChebyshevPoly::for_operator(&op, &density, &Default::default())?;
//! let noise = sampler::white_noise(op.n(), 7);
//! let field = sampler::sample_field(&op, &poly, &noise)?;
//! # Ok::<(), surfield::Error>(())
//! ```

pub mod assembly;
pub mod chebyshev;
pub mod coefficients;
pub mod convergence;
mod error;
pub mod linalg;
pub mod mesh;
pub mod sampler;

pub use error::{Error, Result};
