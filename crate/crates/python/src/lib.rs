//! Python bindings: meshes, assembled operators, spectral densities,
//! Chebyshev polynomials, samplers and the convergence / oracle harness.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use surfield_core::assembly::{assemble, AssembledOperator, MassMode};
use surfield_core::chebyshev::{degree_rule as core_degree_rule, ChebyshevConfig, ChebyshevPoly, SpectralDensity};
use surfield_core::coefficients::Preset;
use surfield_core::convergence::{self, ExperimentConfig, OracleConfig};
use surfield_core::linalg::DEFAULT_ORACLE_CAP;
use surfield_core::mesh::{self, SurfaceMesh};
use surfield_core::sampler::{self, WhiteNoise};

fn py_err(e: surfield_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mass_mode(mode: Option<&str>, dim: usize) -> PyResult<MassMode> {
    match mode {
        None => Ok(MassMode::default_for(dim)),
        Some("consistent") => Ok(MassMode::Consistent),
        Some("lumped") => Ok(MassMode::Lumped),
        Some(other) => Err(PyValueError::new_err(format!(
            "mass_mode must be 'consistent' or 'lumped', got {other:?}"
        ))),
    }
}

/// Closed polyhedral curve (d = 1) or surface (d = 2).
#[pyclass(name = "Mesh")]
struct PyMesh {
    inner: SurfaceMesh,
}

#[pymethods]
impl PyMesh {
    /// Regular polygon with 2^(level+1) vertices on the unit circle.
    #[staticmethod]
    fn circle(level: u32) -> PyResult<Self> {
        mesh::generate_circle(level).map(|inner| Self { inner }).map_err(py_err)
    }

    /// Icosahedron refined `level` times, vertices on the unit sphere.
    #[staticmethod]
    fn icosphere(level: u32) -> PyResult<Self> {
        mesh::generate_icosphere(level).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn load_off(path: &str) -> PyResult<Self> {
        mesh::load_off(path).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_simplices(&self) -> usize {
        self.inner.n_simplices()
    }

    fn mesh_size(&self) -> f64 {
        self.inner.mesh_size()
    }

    fn nominal_size(&self) -> f64 {
        self.inner.nominal_size()
    }

    fn total_measure(&self) -> f64 {
        self.inner.total_measure()
    }

    fn vertices(&self) -> Vec<(f64, f64, f64)> {
        self.inner.vertices().iter().map(|p| (p.x, p.y, p.z)).collect()
    }

    fn simplices(&self) -> Vec<Vec<usize>> {
        self.inner.simplices().map(|s| s.to_vec()).collect()
    }

    fn write_ply(&self, path: &str, values: Vec<f64>) -> PyResult<()> {
        mesh::write_ply(path, &self.inner, &values).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(dim={}, n_vertices={}, n_simplices={})",
            self.inner.dim(),
            self.inner.n_vertices(),
            self.inner.n_simplices()
        )
    }
}

/// Mass and stiffness matrices with the operator `S = √C⁻¹ R √C⁻ᵀ`.
#[pyclass(name = "Operator")]
struct PyOperator {
    inner: AssembledOperator,
}

#[pymethods]
impl PyOperator {
    /// Assembles on `mesh` with a named preset: "circle_experiment", "sphere_experiment",
    /// "matern" (needs kappa2), "localized_potential" or "skew_gradient".
    #[new]
    #[pyo3(signature = (mesh, preset, kappa2=None, mass_mode=None))]
    fn new(mesh: &PyMesh, preset: &str, kappa2: Option<f64>, mass_mode: Option<&str>) -> PyResult<Self> {
        let preset = match (preset, kappa2) {
            ("circle_experiment", _) => Preset::CircleExperiment,
            ("sphere_experiment", _) => Preset::SphereExperiment,
            ("matern", Some(kappa2)) => Preset::Matern { kappa2 },
            ("matern", None) => return Err(PyValueError::new_err("matern preset needs kappa2")),
            ("localized_potential", _) => Preset::LocalizedPotential,
            ("skew_gradient", _) => Preset::SkewGradient,
            (other, _) => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
        };
        let d = mesh.inner.dim();
        let coeffs = preset.build(d).map_err(py_err)?;
        assemble(&mesh.inner, &coeffs, parse_mass_mode(mass_mode, d)?)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn lambda_min(&self) -> f64 {
        self.inner.lambda_min()
    }

    #[getter]
    fn lambda_max(&self) -> f64 {
        self.inner.lambda_max()
    }

    fn apply_s(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply_s(&x).map_err(py_err)
    }

    /// Row-major dense `S` (small meshes only).
    fn dense_s(&self) -> PyResult<Vec<Vec<f64>>> {
        let s = self.inner.dense_s(DEFAULT_ORACLE_CAP).map_err(py_err)?;
        Ok((0..s.nrows()).map(|i| s.row(i).iter().copied().collect()).collect())
    }
}

/// Amplitude spectral density `γ`.
#[pyclass(name = "Density")]
struct PyDensity {
    inner: SpectralDensity,
}

#[pymethods]
impl PyDensity {
    #[staticmethod]
    fn matern(kappa2: f64, alpha: f64) -> Self {
        Self {
            inner: SpectralDensity::Matern { kappa2, alpha },
        }
    }

    #[staticmethod]
    fn circle_paper(v0: f64, alpha: f64) -> Self {
        Self {
            inner: SpectralDensity::CirclePaper { v0, alpha },
        }
    }

    #[staticmethod]
    fn power(c0: f64, alpha: f64) -> Self {
        Self {
            inner: SpectralDensity::Power { c0, alpha },
        }
    }

    #[staticmethod]
    fn oscillatory(alpha: f64) -> Self {
        Self {
            inner: SpectralDensity::Oscillatory { alpha },
        }
    }

    #[staticmethod]
    fn constant(value: f64) -> Self {
        Self {
            inner: SpectralDensity::Constant { value },
        }
    }

    fn __call__(&self, lam: f64) -> f64 {
        self.inner.eval(lam)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    fn __repr__(&self) -> String {
        format!("Density({})", self.inner.label())
    }
}

/// Chebyshev interpolant of a density on a spectral interval.
#[pyclass(name = "ChebyshevPoly")]
struct PyPoly {
    inner: ChebyshevPoly,
}

#[pymethods]
impl PyPoly {
    #[staticmethod]
    fn fit(density: &PyDensity, lambda_min: f64, lambda_max: f64, degree: usize) -> PyResult<Self> {
        ChebyshevPoly::fit(&density.inner, lambda_min, lambda_max, degree)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// Degree from the degree rule, grown until chopping at `epsilon` succeeds.
    #[staticmethod]
    #[pyo3(signature = (op, density, epsilon=1e-12, c_v_scale=1.0))]
    fn for_operator(op: &PyOperator, density: &PyDensity, epsilon: f64, c_v_scale: f64) -> PyResult<Self> {
        let cfg = ChebyshevConfig {
            epsilon,
            c_v_scale,
            ..Default::default()
        };
        ChebyshevPoly::for_operator(&op.inner, &density.inner, &cfg)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    fn chop(&self, epsilon: f64) -> Self {
        Self {
            inner: self.inner.clone().chop(epsilon),
        }
    }

    fn __call__(&self, lam: f64) -> f64 {
        self.inner.eval(lam)
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn active_degree(&self) -> usize {
        self.inner.active_degree()
    }

    #[getter]
    fn interval(&self) -> (f64, f64) {
        self.inner.interval()
    }
}

/// `n` standard normal values from `seed`.
#[pyfunction]
fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    sampler::white_noise(n, seed).values
}

/// Galerkin-Chebyshev nodal weights `√C⁻ᵀ P(S) W`.
#[pyfunction]
fn sample_field(op: &PyOperator, poly: &PyPoly, noise: Vec<f64>) -> PyResult<Vec<f64>> {
    sampler::sample_field(&op.inner, &poly.inner, &WhiteNoise::from_values(noise))
        .map(|s| s.nodal_weights)
        .map_err(py_err)
}

/// Exact Galerkin nodal weights by dense eigendecomposition.
#[pyfunction]
fn exact_sample(op: &PyOperator, density: &PyDensity, noise: Vec<f64>) -> PyResult<Vec<f64>> {
    sampler::exact_sample(&op.inner, &density.inner, &WhiteNoise::from_values(noise), DEFAULT_ORACLE_CAP)
        .map(|s| s.nodal_weights)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (h, dim, v_minus, c_v_scale=1.0))]
fn degree_rule(h: f64, dim: usize, v_minus: f64, c_v_scale: f64) -> PyResult<usize> {
    core_degree_rule(h, dim, v_minus, c_v_scale).map_err(py_err)
}

#[pyfunction]
fn fit_slope(points: Vec<(f64, f64)>) -> PyResult<f64> {
    convergence::fit_slope(&points).map_err(py_err)
}

/// Runs a convergence study from a JSON config and returns the report as JSON.
#[pyfunction]
fn run_convergence(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg: ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = py.detach(|| convergence::run_convergence(&cfg)).map_err(py_err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs the dense oracle suite; returns `(all_passed, rendered_report)`.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn run_oracle_suite(py: Python<'_>, config_json: Option<&str>) -> PyResult<(bool, String)> {
    let cfg: OracleConfig = match config_json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => OracleConfig::default(),
    };
    let report = py.detach(|| convergence::run_oracle_suite(&cfg)).map_err(py_err)?;
    Ok((report.passed(), report.render()))
}

#[pymodule]
#[pyo3(name = "surfield")]
fn surfield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyDensity>()?;
    m.add_class::<PyPoly>()?;
    m.add_function(wrap_pyfunction!(white_noise, m)?)?;
    m.add_function(wrap_pyfunction!(sample_field, m)?)?;
    m.add_function(wrap_pyfunction!(exact_sample, m)?)?;
    m.add_function(wrap_pyfunction!(degree_rule, m)?)?;
    m.add_function(wrap_pyfunction!(fit_slope, m)?)?;
    m.add_function(wrap_pyfunction!(run_convergence, m)?)?;
    m.add_function(wrap_pyfunction!(run_oracle_suite, m)?)?;
    Ok(())
}
