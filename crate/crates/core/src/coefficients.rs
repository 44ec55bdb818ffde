//! Coefficients `(D, V)` of the elliptic form `∫ (D ∇u)·∇v + ∫ V u v`.
//!
//! Coefficients are evaluated on the exact surface (after the closest-point
//! map); the assembly projects `D` onto each element's tangent space.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Point;

pub type DiffusionFn = dyn Fn(&Point) -> Matrix3<f64> + Send + Sync;
pub type PotentialFn = dyn Fn(&Point) -> f64 + Send + Sync;

/// Circle-experiment base potential.
pub const CIRCLE_V0: f64 = 1e4;
/// Diffusion used at the poles of the sphere preset, where the gradient frame degenerates.
pub const SPHERE_POLE_REGULARIZATION: f64 = 0.1;

/// Diffusion matrix field, potential field and declared potential bounds.
#[derive(Clone)]
pub struct CoefficientField {
    name: String,
    dim: usize,
    diffusion: Arc<DiffusionFn>,
    potential: Arc<PotentialFn>,
    v_minus: f64,
    v_plus: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("v_minus", &self.v_minus)
            .field("v_plus", &self.v_plus)
            .finish_non_exhaustive()
    }
}

impl CoefficientField {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        diffusion: impl Fn(&Point) -> Matrix3<f64> + Send + Sync + 'static,
        potential: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        v_minus: f64,
        v_plus: f64,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            diffusion: Arc::new(diffusion),
            potential: Arc::new(potential),
            v_minus,
            v_plus,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Intrinsic dimension the field is defined for (1 = circle, 2 = sphere).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diffusion(&self, x: &Point) -> Matrix3<f64> {
        (self.diffusion)(x)
    }

    pub fn potential(&self, x: &Point) -> f64 {
        (self.potential)(x)
    }

    /// Declared lower bound `V_-` of the potential.
    pub fn v_minus(&self) -> f64 {
        self.v_minus
    }

    pub fn v_plus(&self) -> f64 {
        self.v_plus
    }
}

/// Named presets, as selected from configuration files and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    CircleExperiment,
    SphereExperiment,
    Matern { kappa2: f64 },
    LocalizedPotential,
    SkewGradient,
}

impl Preset {
    pub fn build(&self, dim: usize) -> Result<CoefficientField> {
        let need = |d: usize| {
            if d == dim {
                Ok(())
            } else {
                Err(Error::Config(format!("preset {self:?} requires d = {d}, surface has d = {dim}")))
            }
        };
        match *self {
            Preset::CircleExperiment => need(1).map(|_| preset_circle_experiment()),
            Preset::SphereExperiment => need(2).map(|_| preset_sphere_experiment()),
            Preset::Matern { kappa2 } => {
                if !(kappa2 > 0.0) {
                    return Err(Error::Config(format!("kappa2 must be positive, got {kappa2}")));
                }
                Ok(preset_matern(kappa2, dim))
            }
            Preset::LocalizedPotential => need(2).map(|_| preset_localized_potential()),
            Preset::SkewGradient => need(2).map(|_| preset_skew_gradient()),
        }
    }
}

/// `I - ννᵀ` restricted to the ambient space of a d-surface (the xy-plane for d = 1).
pub fn tangent_projector(x: &Point, dim: usize) -> Matrix3<f64> {
    let mut nu = x.normalize();
    let mut id = Matrix3::identity();
    if dim == 1 {
        nu.z = 0.0;
        nu = nu.normalize();
        id[(2, 2)] = 0.0;
    }
    id - nu * nu.transpose()
}

/// Polar angle from +z in `[0, π]` and azimuth in `[0, 2π)`.
pub fn spherical_angles(x: &Point) -> (f64, f64) {
    let u = x.normalize();
    let theta = u.z.clamp(-1.0, 1.0).acos();
    let phi = u.y.atan2(u.x).rem_euclid(2.0 * PI);
    (theta, phi)
}

/// Circle experiment: `D = I - ννᵀ`; `V = 3V₀` on the open left half (θ ∈ (π/2, 3π/2)), `V₀` elsewhere.
pub fn preset_circle_experiment() -> CoefficientField {
    CoefficientField::new(
        "circle_experiment",
        1,
        |x| tangent_projector(x, 1),
        // θ ∈ (π/2, 3π/2) exactly when cos θ < 0
        |x| if x.x < 0.0 { 3.0 * CIRCLE_V0 } else { CIRCLE_V0 },
        CIRCLE_V0,
        3.0 * CIRCLE_V0,
    )
}

/// Surface gradient of `f = 2 cosθ cosφ sin²θ` on the unit sphere, in Cartesian components.
pub fn sphere_experiment_gradient(x: &Point) -> Point {
    let u = x.normalize();
    let (z, s) = (u.z, u.x.hypot(u.y));
    if s == 0.0 {
        return Point::zeros();
    }
    // ∂θf = 2 cosφ sinθ (2cos²θ - sin²θ), (1/sinθ) ∂φf = -2 cosθ sinθ sinφ
    let a = 2.0 * u.x * (2.0 * z * z - s * s);
    let b = -2.0 * z * u.y;
    let e_theta = Point::new(z * u.x / s, z * u.y / s, -s);
    let e_phi = Point::new(-u.y / s, u.x / s, 0.0);
    e_theta * a + e_phi * b
}

/// Sphere experiment: `D = ∇f ∇fᵀ + ρ X Xᵀ` with `X = x × ∇f`, `V = 500(1 + 5cos²(πθ))`.
pub fn preset_sphere_experiment() -> CoefficientField {
    CoefficientField::new(
        "sphere_experiment",
        2,
        |x| {
            let u = x.normalize();
            if u.x.hypot(u.y) < 1e-12 {
                return tangent_projector(&u, 2) * SPHERE_POLE_REGULARIZATION;
            }
            let g = sphere_experiment_gradient(&u);
            let skew = u.cross(&g);
            let rho = 0.1 + 0.6 / (1.0 + (-4.0 * u.z).exp());
            g * g.transpose() + skew * skew.transpose() * rho
        },
        |x| {
            let (theta, _) = spherical_angles(x);
            500.0 * (1.0 + 5.0 * (PI * theta).cos().powi(2))
        },
        500.0,
        3000.0,
    )
}

/// Stationary Whittle-Matérn coefficients: `D = I - ννᵀ`, `V ≡ κ²`.
pub fn preset_matern(kappa2: f64, dim: usize) -> CoefficientField {
    CoefficientField::new(
        format!("matern(kappa2={kappa2})"),
        dim,
        move |x| tangent_projector(x, dim),
        move |_| kappa2,
        kappa2,
        kappa2,
    )
}

/// `D = I - ννᵀ`; `V = 10⁵` where `x₂⁶ + x₁³ - x₃² ∈ (0.1, 0.5)`, `V = 10` elsewhere.
pub fn preset_localized_potential() -> CoefficientField {
    CoefficientField::new(
        "localized_potential",
        2,
        |x| tangent_projector(x, 2),
        |x| {
            let u = x.normalize();
            let g = u.y.powi(6) + u.x.powi(3) - u.z * u.z;
            if g > 0.1 && g < 0.5 {
                1e5
            } else {
                10.0
            }
        },
        10.0,
        1e5,
    )
}

/// Diffusion elongated along the level sets of `f(x) = x₂`: `D = ∇f∇fᵀ + 25 X Xᵀ`, `V ≡ 10`.
pub fn preset_skew_gradient() -> CoefficientField {
    const RHO_GRADIENT: f64 = 1.0;
    const RHO_SKEW: f64 = 25.0;
    CoefficientField::new(
        "skew_gradient",
        2,
        |x| {
            let u = x.normalize();
            let g = Point::y() - u * u.y;
            let skew = u.cross(&g);
            g * g.transpose() * RHO_GRADIENT + skew * skew.transpose() * RHO_SKEW
        },
        |_| 10.0,
        10.0,
        10.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn sphere_points(n: usize) -> Vec<Point> {
        // Fibonacci lattice
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * i as f64;
                Point::new(r * t.cos(), r * t.sin(), z)
            })
            .collect()
    }

    fn circle_points(n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + 0.37) / n as f64;
                Point::new(t.cos(), t.sin(), 0.0)
            })
            .collect()
    }

    #[test]
    fn circle_preset_values() {
        let c = preset_circle_experiment();
        let d = c.diffusion(&Point::new(1.0, 0.0, 0.0));
        let expected = Matrix3::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        assert!((d - expected).amax() < 1e-15);
        assert_eq!(c.potential(&Point::new(-1.0, 0.0, 0.0)), 3e4);
        let top = Point::new((PI / 2.0).cos(), 1.0, 0.0);
        assert_eq!(c.potential(&top), 1e4);
        assert_eq!(c.potential(&Point::new(0.0, 1.0, 0.0)), 1e4);
        assert_eq!((c.v_minus(), c.v_plus()), (1e4, 3e4));
    }

    #[test]
    fn sphere_preset_values() {
        let c = preset_sphere_experiment();
        let north = Point::new(0.0, 0.0, 1.0);
        assert_eq!(c.potential(&north), 3000.0);
        // at the pole the regularized diffusion is 0.1 times the tangent projector
        let d = c.diffusion(&north);
        assert!((d - tangent_projector(&north, 2) * 0.1).amax() < 1e-15);
        let rho_equator = 0.1 + 0.6 / (1.0 + (-4.0f64 * 0.0).exp());
        assert!((rho_equator - 0.4).abs() < 1e-15);
    }

    #[test]
    fn sphere_gradient_matches_finite_differences() {
        let f = |x: &Point| {
            let (t, p) = spherical_angles(x);
            2.0 * t.cos() * p.cos() * t.sin().powi(2)
        };
        for x in sphere_points(50) {
            let g = sphere_experiment_gradient(&x);
            assert!(g.dot(&x).abs() < 1e-12);
            let t1 = x.cross(&Point::new(0.3, -0.2, 0.9)).normalize();
            let t2 = x.cross(&t1);
            for t in [t1, t2] {
                let h = 1e-6;
                let fd = (f(&(x + t * h)) - f(&(x - t * h))) / (2.0 * h);
                assert!((fd - g.dot(&t)).abs() < 1e-6, "fd {fd} vs {}", g.dot(&t));
            }
        }
    }

    #[test]
    fn skew_preset_eigenvalues() {
        let c = preset_skew_gradient();
        let x = Point::new(1.0, 0.0, 0.0);
        let d = c.diffusion(&x);
        let mut ev: Vec<f64> = SymmetricEigen::new(d).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14 && (ev[2] - 25.0).abs() < 1e-13);
        assert!((d * Point::z() - Point::z() * 25.0).norm() < 1e-13);
    }

    #[test]
    fn localized_potential_region() {
        let c = preset_localized_potential();
        assert_eq!(c.potential(&Point::new(0.0, 1.0, 0.0)), 10.0);
        // x₂ = 0: g = x₁³ - x₃²
        let x = Point::new(0.8, 0.0, 0.6);
        let g = 0.8f64.powi(3) - 0.36;
        assert!(g > 0.1 && g < 0.5);
        assert_eq!(c.potential(&x), 1e5);
    }

    #[test]
    fn tangentiality_symmetry_and_bounds() {
        let presets = [
            preset_sphere_experiment(),
            preset_matern(10.0, 2),
            preset_localized_potential(),
            preset_skew_gradient(),
        ];
        let pts = sphere_points(1000);
        for c in &presets {
            for x in &pts {
                let d = c.diffusion(x);
                assert!((d * x).norm() < 1e-12, "{} not tangential", c.name());
                assert_eq!(d, d.transpose());
                let v = c.potential(x);
                assert!(v >= c.v_minus() && v <= c.v_plus());
                // tangential eigenvalues: D restricted to the tangent plane
                let t1 = x.cross(&Point::new(0.3, -0.2, 0.9)).normalize();
                let t2 = x.cross(&t1);
                let a = nalgebra::Matrix2::new(
                    t1.dot(&(d * t1)),
                    t1.dot(&(d * t2)),
                    t2.dot(&(d * t1)),
                    t2.dot(&(d * t2)),
                );
                assert!(SymmetricEigen::new(a).eigenvalues.min() > 0.0, "{}", c.name());
            }
        }
        let circ = [preset_circle_experiment(), preset_matern(10.0, 1)];
        for c in &circ {
            for x in circle_points(1000) {
                let d = c.diffusion(&x);
                assert!((d * x).norm() < 1e-12);
                let t = Point::new(-x.y, x.x, 0.0);
                assert!(t.dot(&(d * t)) > 0.0);
                let v = c.potential(&x);
                assert!(v >= c.v_minus() && v <= c.v_plus());
            }
        }
    }

    #[test]
    fn preset_dimension_checked() {
        assert!(Preset::CircleExperiment.build(2).is_err());
        assert!(Preset::Matern { kappa2: -1.0 }.build(2).is_err());
        let p: Preset = serde_json::from_str(r#"{"name":"matern","kappa2":10.0}"#).unwrap();
        assert_eq!(p, Preset::Matern { kappa2: 10.0 });
        assert!(serde_json::from_str::<Preset>(r#"{"name":"matern","kappa":1}"#).is_err());
    }
}
