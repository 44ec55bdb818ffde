//! Chebyshev interpolants of amplitude spectral densities and their
//! application to symmetric operators by the Clenshaw recurrence.
//!
//! Coefficients are those of the degree-`M` interpolant at the `M + 1`
//! Chebyshev-Gauss nodes of `[λ_min, λ_max]`. Chopping drops the trailing
//! coefficients whose size relative to `max |c_k|` stays below `ε`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use log::warn;

use crate::assembly::AssembledOperator;
use crate::error::{check_len, Error, Result};
use crate::linalg::LinearOperator;

/// Amplitude spectral density `γ` with its declared decay exponent `α`.
#[derive(Clone)]
pub enum SpectralDensity {
    /// `(κ² + λ)^{-α}`
    Matern { kappa2: f64, alpha: f64 },
    /// `V₀^α (λ + cos(0.9π)√λ)^{-α}`
    CirclePaper { v0: f64, alpha: f64 },
    /// `C₀ λ^{-α}`
    Power { c0: f64, alpha: f64 },
    /// `sin(λ) λ^{-α}`
    Oscillatory { alpha: f64 },
    /// `γ ≡ value` (decay exponent 0)
    Constant { value: f64 },
    Custom {
        label: String,
        alpha: f64,
        gamma: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl SpectralDensity {
    pub fn custom(label: impl Into<String>, alpha: f64, gamma: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SpectralDensity::Custom {
            label: label.into(),
            alpha,
            gamma: Arc::new(gamma),
        }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            SpectralDensity::Matern { kappa2, alpha } => (kappa2 + lambda).powf(-alpha),
            SpectralDensity::CirclePaper { v0, alpha } => {
                v0.powf(*alpha) * (lambda + (0.9 * PI).cos() * lambda.sqrt()).powf(-alpha)
            }
            SpectralDensity::Power { c0, alpha } => c0 * lambda.powf(-alpha),
            SpectralDensity::Oscillatory { alpha } => lambda.sin() * lambda.powf(-alpha),
            SpectralDensity::Constant { value } => *value,
            SpectralDensity::Custom { gamma, .. } => gamma(lambda),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            SpectralDensity::Matern { alpha, .. }
            | SpectralDensity::CirclePaper { alpha, .. }
            | SpectralDensity::Power { alpha, .. }
            | SpectralDensity::Oscillatory { alpha }
            | SpectralDensity::Custom { alpha, .. } => *alpha,
            SpectralDensity::Constant { .. } => 0.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SpectralDensity::Matern { kappa2, alpha } => format!("matern(kappa2={kappa2}, alpha={alpha})"),
            SpectralDensity::CirclePaper { v0, alpha } => format!("circle_paper(v0={v0}, alpha={alpha})"),
            SpectralDensity::Power { c0, alpha } => format!("power(c0={c0}, alpha={alpha})"),
            SpectralDensity::Oscillatory { alpha } => format!("oscillatory(alpha={alpha})"),
            SpectralDensity::Constant { value } => format!("constant({value})"),
            SpectralDensity::Custom { label, .. } => label.clone(),
        }
    }

    /// `max |γ(λ)| λ^α` over a logarithmic grid of `[λ_min, 10⁶ λ_min]`.
    ///
    /// A finite value is the numerical stand-in for the decay condition `|γ(λ)| ≲ λ^{-α}`.
    pub fn decay_constant(&self, lambda_min: f64) -> f64 {
        const POINTS: usize = 601;
        (0..POINTS)
            .map(|i| {
                let lambda = lambda_min * 10f64.powf(6.0 * i as f64 / (POINTS - 1) as f64);
                self.eval(lambda).abs() * lambda.powf(self.alpha())
            })
            .fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) })
    }
}

/// Knobs for choosing and chopping the polynomial degree.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevConfig {
    /// Relative chop threshold.
    pub epsilon: f64,
    /// Scale of the constant `C_V = c_v_scale·√V₋` in the degree rule.
    pub c_v_scale: f64,
    /// Double the degree until the chop threshold is reached.
    pub grow_until_chopped: bool,
    pub max_degree: usize,
}

impl Default for ChebyshevConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-12,
            c_v_scale: 1.0,
            grow_until_chopped: true,
            max_degree: 1 << 16,
        }
    }
}

/// `M_h = ⌈(d/2 + 3) |log h| / (C_V h)⌉` with `C_V = c_v_scale·√V₋`.
pub fn degree_rule(h: f64, dim: usize, v_minus: f64, c_v_scale: f64) -> Result<usize> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidMeshSize(h));
    }
    if !(v_minus > 0.0 && c_v_scale > 0.0) {
        return Err(Error::Config(format!(
            "degree rule needs V- > 0 and c_v_scale > 0 (got {v_minus}, {c_v_scale})"
        )));
    }
    let c_v = c_v_scale * v_minus.sqrt();
    let m = (dim as f64 / 2.0 + 3.0) * h.ln().abs() / (c_v * h);
    Ok(m.ceil().max(1.0) as usize)
}

/// Largest chop threshold that keeps the chopped field within the `h²` error budget:
/// `h^{3+d/2} / |log h|`.
pub fn epsilon_requirement(h: f64, dim: usize) -> f64 {
    h.powf(3.0 + dim as f64 / 2.0) / h.ln().abs()
}

/// Chebyshev interpolant on `[lambda_min, lambda_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevPoly {
    lambda_min: f64,
    lambda_max: f64,
    coeffs: Vec<f64>,
    chopped_degree: Option<usize>,
    epsilon: Option<f64>,
}

impl ChebyshevPoly {
    /// Interpolates `density` at the `degree + 1` Chebyshev-Gauss nodes.
    pub fn fit(density: &SpectralDensity, lambda_min: f64, lambda_max: f64, degree: usize) -> Result<Self> {
        Self::fit_fn(|l| density.eval(l), &density.label(), lambda_min, lambda_max, degree)
    }

    pub fn fit_fn(
        f: impl Fn(f64) -> f64,
        label: &str,
        lambda_min: f64,
        lambda_max: f64,
        degree: usize,
    ) -> Result<Self> {
        if !(lambda_max > lambda_min) || !lambda_min.is_finite() || !lambda_max.is_finite() {
            return Err(Error::InvalidInterval {
                lo: lambda_min,
                hi: lambda_max,
            });
        }
        let n = degree + 1;
        let (mid, half) = ((lambda_max + lambda_min) / 2.0, (lambda_max - lambda_min) / 2.0);
        // cos(π q / 2n), q = k(2j+1) mod 4n
        let table: Vec<f64> = (0..4 * n).map(|q| (PI * q as f64 / (2 * n) as f64).cos()).collect();
        let mut values = Vec::with_capacity(n);
        for j in 0..n {
            let lambda = mid + half * table[2 * j + 1];
            let v = f(lambda);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    label: label.to_string(),
                    node: j,
                    lambda,
                });
            }
            values.push(v);
        }
        let modulus = 4 * n;
        let coeffs = (0..n)
            .map(|k| {
                let step = (2 * k) % modulus;
                let mut q = k % modulus;
                let mut s = 0.0;
                for v in &values {
                    s += v * table[q];
                    q += step;
                    if q >= modulus {
                        q -= modulus;
                    }
                }
                s * if k == 0 { 1.0 } else { 2.0 } / n as f64
            })
            .collect();
        Ok(Self {
            lambda_min,
            lambda_max,
            coeffs,
            chopped_degree: None,
            epsilon: None,
        })
    }

    /// Builds a polynomial directly from coefficients.
    pub fn from_coeffs(lambda_min: f64, lambda_max: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(lambda_max > lambda_min) || coeffs.is_empty() {
            return Err(Error::InvalidInterval {
                lo: lambda_min,
                hi: lambda_max,
            });
        }
        Ok(Self {
            lambda_min,
            lambda_max,
            coeffs,
            chopped_degree: None,
            epsilon: None,
        })
    }

    /// Fits at `start_degree`, chops at `config.epsilon`, and with
    /// `grow_until_chopped` doubles the degree until some trailing block of
    /// coefficients falls below the threshold (or `max_degree` is reached).
    pub fn fit_chopped(
        density: &SpectralDensity,
        lambda_min: f64,
        lambda_max: f64,
        start_degree: usize,
        config: &ChebyshevConfig,
    ) -> Result<Self> {
        let mut degree = start_degree.max(1).min(config.max_degree);
        loop {
            let poly = Self::fit(density, lambda_min, lambda_max, degree)?.chop(config.epsilon);
            if poly.chop_found() || !config.grow_until_chopped || degree >= config.max_degree {
                if !poly.chop_found() {
                    warn!(
                        "{}: coefficients did not fall below {:e} by degree {degree}",
                        density.label(),
                        config.epsilon
                    );
                }
                return Ok(poly);
            }
            degree = (2 * degree).min(config.max_degree);
        }
    }

    /// Polynomial for the spectral interval of `op`, starting from the degree rule at the operator's mesh size.
    pub fn for_operator(op: &AssembledOperator, density: &SpectralDensity, config: &ChebyshevConfig) -> Result<Self> {
        let h = op
            .mesh_size()
            .ok_or_else(|| Error::Config("operator has no mesh size for the degree rule".into()))?;
        let start = degree_rule(h, op.dim(), op.lambda_min(), config.c_v_scale)?;
        if config.epsilon > epsilon_requirement(h, op.dim()) {
            warn!(
                "chop threshold {:e} exceeds h^(3+d/2)/|log h| = {:e}",
                config.epsilon,
                epsilon_requirement(h, op.dim())
            );
        }
        Self::fit_chopped(density, op.lambda_min(), op.lambda_max(), start, config)
    }

    /// Marks every coefficient past the last one with `|c_k| / max|c| ≥ epsilon` as dropped.
    pub fn chop(mut self, epsilon: f64) -> Self {
        let c_max = self.c_max();
        let m = if c_max > 0.0 {
            self.coeffs.iter().rposition(|c| c.abs() / c_max >= epsilon).unwrap_or(0)
        } else {
            0
        };
        self.chopped_degree = Some(m);
        self.epsilon = Some(epsilon);
        self
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }

    /// Full fitted degree `M`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn chopped_degree(&self) -> Option<usize> {
        self.chopped_degree
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// True when chopping removed at least one coefficient.
    pub fn chop_found(&self) -> bool {
        self.chopped_degree.is_some_and(|m| m < self.degree())
    }

    /// Degree used for evaluation: the chopped degree if set, else `M`.
    pub fn active_degree(&self) -> usize {
        self.chopped_degree.unwrap_or(self.degree())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn active_coeffs(&self) -> &[f64] {
        &self.coeffs[..=self.active_degree()]
    }

    pub fn c_max(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// The same coefficients with chopping undone.
    pub fn unchopped(&self) -> Self {
        Self {
            chopped_degree: None,
            epsilon: None,
            ..self.clone()
        }
    }

    fn shift(&self, lambda: f64) -> f64 {
        (2.0 * lambda - (self.lambda_max + self.lambda_min)) / (self.lambda_max - self.lambda_min)
    }

    /// Scalar Clenshaw evaluation of the active polynomial.
    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda < self.lambda_min || lambda > self.lambda_max {
            warn!(
                "evaluating Chebyshev polynomial at {lambda} outside [{}, {}]",
                self.lambda_min, self.lambda_max
            );
        }
        let t = self.shift(lambda);
        let c = self.active_coeffs();
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c[1..].iter().rev() {
            let b0 = ck + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        c[0] + t * b1 - b2
    }

    /// `P(S) w` by the operator Clenshaw recurrence on `Ŝ = (2S - (λ_max+λ_min)I)/(λ_max-λ_min)`.
    ///
    /// Uses exactly `active_degree()` applications of `op`.
    pub fn apply<O: LinearOperator + ?Sized>(&self, op: &O, w: &[f64]) -> Result<Vec<f64>> {
        let n = op.dim();
        check_len(n, w.len())?;
        let c = self.active_coeffs();
        let m = c.len() - 1;
        let (sum, scale) = (
            self.lambda_max + self.lambda_min,
            2.0 / (self.lambda_max - self.lambda_min),
        );
        let s_hat = |x: &[f64], out: &mut [f64]| -> Result<()> {
            op.apply_into(x, out)?;
            for (o, xi) in out.iter_mut().zip(x) {
                *o = scale * (*o - 0.5 * sum * xi);
            }
            Ok(())
        };
        if m == 0 {
            return Ok(w.iter().map(|x| c[0] * x).collect());
        }
        // b1 = b_{k+1}, b2 = b_{k+2}
        let mut b1: Vec<f64> = w.iter().map(|x| c[m] * x).collect();
        let mut b2 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for &ck in c[1..m].iter().rev() {
            s_hat(&b1, &mut tmp)?;
            for i in 0..n {
                let b0 = ck * w[i] + 2.0 * tmp[i] - b2[i];
                b2[i] = b1[i];
                b1[i] = b0;
            }
        }
        s_hat(&b1, &mut tmp)?;
        Ok((0..n).map(|i| c[0] * w[i] + tmp[i] - b2[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    struct Counting<'a> {
        inner: &'a dyn LinearOperator,
        calls: Cell<usize>,
    }

    impl LinearOperator for Counting<'_> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
            self.calls.set(self.calls.get() + 1);
            self.inner.apply_into(x, y)
        }
    }

    #[test]
    fn linear_function_coefficients() {
        let p = ChebyshevPoly::fit_fn(|l| l, "id", 0.0, 1.0, 1).unwrap();
        assert!((p.coeffs()[0] - 0.5).abs() < 1e-15);
        assert!((p.coeffs()[1] - 0.5).abs() < 1e-15);
        assert!((p.eval(0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_function() {
        let p = ChebyshevPoly::fit(&SpectralDensity::Constant { value: 7.0 }, 2.0, 9.0, 6).unwrap();
        assert!((p.coeffs()[0] - 7.0).abs() < 1e-14);
        assert!(p.coeffs()[1..].iter().all(|c| c.abs() < 1e-14));
        assert!((p.eval(3.3) - 7.0).abs() < 1e-14);
    }

    #[test]
    fn interpolates_at_nodes() {
        let d = SpectralDensity::Matern { kappa2: 10.0, alpha: 1.5 };
        let (lo, hi, m) = (10.0, 500.0, 24);
        let p = ChebyshevPoly::fit(&d, lo, hi, m).unwrap();
        for j in 0..=m {
            let x = (PI * (j as f64 + 0.5) / (m + 1) as f64).cos();
            let lambda = (hi + lo) / 2.0 + (hi - lo) / 2.0 * x;
            assert!((p.eval(lambda) - d.eval(lambda)).abs() < 1e-14 * d.eval(lo));
        }
    }

    #[test]
    fn non_finite_density_names_node() {
        let d = SpectralDensity::custom("bad", 1.0, |l| if l > 5.0 { f64::NAN } else { 1.0 });
        match ChebyshevPoly::fit(&d, 0.0, 10.0, 3).unwrap_err() {
            Error::Evaluation { label, lambda, .. } => {
                assert_eq!(label, "bad");
                assert!(lambda > 5.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn chop_examples() {
        let p = ChebyshevPoly::from_coeffs(0.0, 1.0, vec![1.0, 1e-13, 1e-14]).unwrap().chop(1e-12);
        assert_eq!(p.chopped_degree(), Some(0));
        let p = ChebyshevPoly::from_coeffs(0.0, 1.0, vec![1.0, 0.5, 1e-13, 0.2]).unwrap().chop(1e-12);
        assert_eq!(p.chopped_degree(), Some(3));
        assert!(!p.chop_found());
    }

    #[test]
    fn degree_rule_examples() {
        let h = (-1f64).exp();
        assert_eq!(degree_rule(h, 1, 1.0, 1.0).unwrap(), 10);
        assert!(degree_rule(h / 2.0, 1, 1.0, 1.0).unwrap() > 10);
        assert!(matches!(degree_rule(1.0, 2, 1.0, 1.0), Err(Error::InvalidMeshSize(_))));
    }

    #[test]
    fn polynomial_exactness() {
        let f = |l: f64| 3.0 - 2.0 * l + 0.5 * l * l - 0.01 * l.powi(3);
        let p = ChebyshevPoly::fit_fn(f, "cubic", -2.0, 5.0, 7).unwrap();
        for i in 0..=20 {
            let l = -2.0 + 7.0 * i as f64 / 20.0;
            assert!((p.eval(l) - f(l)).abs() <= 1e-13 * p.c_max().max(1.0));
        }
        assert!(p.coeffs()[4..].iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn matern_error_decays_geometrically() {
        let d = SpectralDensity::Matern { kappa2: 10.0, alpha: 1.5 };
        let (lo, hi) = (10.0, 200.0);
        let err = |m: usize| {
            let p = ChebyshevPoly::fit(&d, lo, hi, m).unwrap();
            (0..50)
                .map(|i| {
                    let l = lo + (hi - lo) * (i as f64 + 0.5) / 50.0;
                    (p.eval(l) - d.eval(l)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e8, e16, e32) = (err(8), err(16), err(32));
        assert!(e16 * 10.0 <= e8, "{e8} {e16}");
        assert!(e32 * 10.0 <= e16, "{e16} {e32}");
    }

    #[test]
    fn operator_clenshaw_on_diagonal() {
        let diag = [1.5, 3.0, 7.25, 9.9];
        let s = crate::linalg::SparseMatrix::from_diagonal(&diag);
        let d = SpectralDensity::Matern { kappa2: 1.0, alpha: 0.75 };
        let p = ChebyshevPoly::fit(&d, 1.0, 10.0, 12).unwrap().chop(1e-12);
        let w = [1.0, -2.0, 0.5, 3.0];
        let counting = Counting {
            inner: &s,
            calls: Cell::new(0),
        };
        let y = p.apply(&counting, &w).unwrap();
        assert_eq!(counting.calls.get(), p.active_degree());
        for i in 0..4 {
            assert!((y[i] - p.eval(diag[i]) * w[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_fit_applies_operator() {
        let s = crate::linalg::SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 2, 4.0), (1, 2, 0.5), (2, 1, 0.5)],
        )
        .unwrap();
        let p = ChebyshevPoly::fit_fn(|l| l, "id", 0.5, 5.0, 1).unwrap();
        let w = [0.3, -1.0, 2.0];
        let y = p.apply(&s, &w).unwrap();
        let sw = s.spmv(&w).unwrap();
        assert!(crate::linalg::relative_l2(&y, &sw) < 1e-12);
    }

    #[test]
    fn grows_until_chopped() {
        let d = SpectralDensity::Matern { kappa2: 10.0, alpha: 1.0 };
        let p = ChebyshevPoly::fit_chopped(&d, 10.0, 1e4, 4, &ChebyshevConfig::default()).unwrap();
        assert!(p.chop_found());
        assert!(p.degree() > 4);
        let fixed = ChebyshevConfig {
            grow_until_chopped: false,
            ..Default::default()
        };
        let q = ChebyshevPoly::fit_chopped(&d, 10.0, 1e4, 4, &fixed).unwrap();
        assert_eq!(q.degree(), 4);
    }

    #[test]
    fn decay_constants_are_finite() {
        for d in [
            SpectralDensity::Matern { kappa2: 10.0, alpha: 1.5 },
            SpectralDensity::CirclePaper { v0: 1e4, alpha: 1.05 },
            SpectralDensity::Power { c0: 500.0, alpha: 0.75 },
            SpectralDensity::Oscillatory { alpha: 0.6 },
        ] {
            assert!(d.decay_constant(10.0).is_finite(), "{}", d.label());
        }
    }

    #[test]
    fn circle_density_at_paper_scale() {
        let d = SpectralDensity::CirclePaper { v0: 1e4, alpha: 1.0 };
        let l: f64 = 1e4;
        let expected = 1e4 / (l + (0.9 * PI).cos() * 100.0);
        assert!((d.eval(l) - expected).abs() < 1e-15);
    }
}
