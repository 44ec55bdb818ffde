//! Strong-error convergence experiments, field snapshots and the dense
//! oracle suite.
//!
//! A run draws white noise on the finest mesh, projects it level by level
//! onto each coarser mesh, samples every level with the same noise, and
//! measures `‖P Z_coarse − Z_fine‖` in the fine mass norm after nodal
//! prolongation. The RMSE over samples is fitted against `h` on log-log axes.

mod oracle;
mod snapshot;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, AssembledOperator, MassMode};
use crate::chebyshev::{ChebyshevConfig, ChebyshevPoly, SpectralDensity};
use crate::coefficients::Preset;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mesh::{generate_circle, generate_icosphere, MeshLadder, SurfaceMesh};
use crate::sampler::{project_noise, projection_defect, sample_field, white_noise, WhiteNoise};

pub use oracle::{run_oracle_suite, CheckStatus, OracleCheck, OracleConfig, OracleReport};
pub use snapshot::{snapshot, SnapshotFiles, SnapshotSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Circle,
    Sphere,
}

impl Surface {
    pub fn dim(self) -> usize {
        match self {
            Surface::Circle => 1,
            Surface::Sphere => 2,
        }
    }

    /// Generated mesh at refinement `level`.
    pub fn mesh(self, level: u32) -> Result<SurfaceMesh> {
        match self {
            Surface::Circle => generate_circle(level),
            Surface::Sphere => generate_icosphere(level),
        }
    }

    /// Coefficient preset of the reference experiment on this surface.
    pub fn experiment_preset(self) -> Preset {
        match self {
            Surface::Circle => Preset::CircleExperiment,
            Surface::Sphere => Preset::SphereExperiment,
        }
    }
}

/// Named density family; the exponent `α` is supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Matern { kappa2: f64 },
    CirclePaper { v0: f64 },
    Power { c0: f64 },
    Oscillatory,
    Constant { value: f64 },
}

impl DensitySpec {
    pub fn with_alpha(&self, alpha: f64) -> SpectralDensity {
        match *self {
            DensitySpec::Matern { kappa2 } => SpectralDensity::Matern { kappa2, alpha },
            DensitySpec::CirclePaper { v0 } => SpectralDensity::CirclePaper { v0, alpha },
            DensitySpec::Power { c0 } => SpectralDensity::Power { c0, alpha },
            DensitySpec::Oscillatory => SpectralDensity::Oscillatory { alpha },
            DensitySpec::Constant { value } => SpectralDensity::Constant { value },
        }
    }
}

/// Parameters of a convergence study. JSON field names match the struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub surface: Surface,
    /// Coarse levels whose error against the fine level is measured.
    pub levels: Vec<u32>,
    pub fine_level: u32,
    pub alphas: Vec<f64>,
    pub density: DensitySpec,
    pub coeffs: Preset,
    pub n_samples: usize,
    pub seed: u64,
    /// Defaults to Cholesky for curves and lumping for surfaces.
    pub mass_mode: Option<MassMode>,
    pub epsilon: f64,
    pub c_v_scale: f64,
    pub output_dir: Option<PathBuf>,
    /// Accepted deviation of each fitted slope from the theoretical rate.
    pub slope_tolerance: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::circle_reference()
    }
}

impl ExperimentConfig {
    /// Desk-scale version of the circle experiment.
    pub fn circle_reference() -> Self {
        Self {
            surface: Surface::Circle,
            levels: vec![6, 7, 8, 9],
            fine_level: 11,
            alphas: vec![0.5, 1.05, 1.5],
            density: DensitySpec::CirclePaper { v0: 1e4 },
            coeffs: Preset::CircleExperiment,
            n_samples: 25,
            seed: 0,
            mass_mode: None,
            epsilon: 1e-12,
            c_v_scale: 1.0,
            output_dir: None,
            slope_tolerance: None,
        }
    }

    /// Desk-scale version of the sphere experiment.
    pub fn sphere_reference() -> Self {
        Self {
            surface: Surface::Sphere,
            levels: vec![2, 3, 4],
            fine_level: 6,
            alphas: vec![0.75, 1.25, 2.25],
            density: DensitySpec::Power { c0: 500.0 },
            coeffs: Preset::SphereExperiment,
            mass_mode: Some(MassMode::Lumped),
            ..Self::circle_reference()
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn mass_mode(&self) -> MassMode {
        self.mass_mode.unwrap_or(MassMode::default_for(self.surface.dim()))
    }

    pub fn chebyshev(&self) -> ChebyshevConfig {
        ChebyshevConfig {
            epsilon: self.epsilon,
            c_v_scale: self.c_v_scale,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.surface.dim();
        let Some(&max_level) = self.levels.iter().max() else {
            return Err(Error::Config("level list is empty".into()));
        };
        if self.fine_level <= max_level {
            return Err(Error::Config(format!(
                "fine_level {} must exceed every coarse level (max {max_level})",
                self.fine_level
            )));
        }
        if self.surface == Surface::Circle && self.levels.contains(&0) {
            return Err(Error::Config("circle levels start at 1".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("alpha list is empty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|&&a| !(a > d as f64 / 4.0)) {
            return Err(Error::Config(format!("alpha {a} must exceed d/4 = {}", d as f64 / 4.0)));
        }
        if !(self.epsilon > 0.0) || !(self.c_v_scale > 0.0) {
            return Err(Error::Config("epsilon and c_v_scale must be positive".into()));
        }
        self.coeffs.build(d).map(|_| ())
    }
}

/// Logarithmic factor accompanying the strong-error rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFactor {
    /// `|log h|` for `d/4 < α ≤ 1`
    Log,
    /// `|log h|^{3/2}` for `1 < α < 1 + d/2`
    LogThreeHalves,
    /// `|log h|^{1/2}` for `α ≥ 1 + d/2`
    LogHalf,
}

impl LogFactor {
    pub fn classify(alpha: f64, dim: usize) -> Self {
        if alpha <= 1.0 {
            LogFactor::Log
        } else if alpha < 1.0 + dim as f64 / 2.0 {
            LogFactor::LogThreeHalves
        } else {
            LogFactor::LogHalf
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            LogFactor::Log => "|log h|",
            LogFactor::LogThreeHalves => "|log h|^(3/2)",
            LogFactor::LogHalf => "|log h|^(1/2)",
        }
    }
}

/// `2 min(α − d/4, 1)`.
pub fn theoretical_slope(alpha: f64, dim: usize) -> f64 {
    2.0 * (alpha - dim as f64 / 4.0).min(1.0)
}

/// Least-squares slope of `log rmse` against `log h`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::NotEnoughPoints {
            needed: 2,
            got: points.len(),
        });
    }
    if let Some(&(h, e)) = points.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(Error::Config(format!("slope fit needs positive data, got ({h}, {e})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("slope fit needs at least two distinct mesh sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub level: u32,
    pub h: f64,
    pub n_vertices: usize,
    pub rmse: f64,
    pub cheb_degree: usize,
    pub chopped_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRates {
    pub alpha: f64,
    pub points: Vec<RatePoint>,
    /// `None` when fewer than two levels were run.
    pub slope: Option<f64>,
    pub theoretical_slope: f64,
    pub log_factor: LogFactor,
    /// Levels at which the RMSE increased under refinement.
    pub inversions: Vec<u32>,
    pub within_tolerance: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub surface: Surface,
    pub dim: usize,
    pub fine_level: u32,
    pub n_samples: usize,
    pub fine_cheb_degree: Vec<usize>,
    /// `(coarse level, ‖√C_c⁻¹PᵀC_fP√C_c⁻ᵀ − I‖_max)` for each projection step used.
    pub projection_defects: Vec<(u32, f64)>,
    pub rates: Vec<AlphaRates>,
}

impl RateReport {
    /// False when a slope tolerance was requested and some slope missed it.
    pub fn passed(&self) -> bool {
        self.rates.iter().all(|r| r.within_tolerance != Some(false))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,h,n_vertices,rmse,cheb_degree,chopped_degree\n");
        for r in &self.rates {
            for p in &r.points {
                let _ = writeln!(
                    s,
                    "{},{:e},{},{:e},{},{}",
                    r.alpha, p.h, p.n_vertices, p.rmse, p.cheb_degree, p.chopped_degree
                );
            }
        }
        s
    }

    /// Human-readable rate table.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rates {
            let slope = r.slope.map_or("undefined".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(
                s,
                "alpha={} slope={} theory={:.3} (up to {}){}",
                r.alpha,
                slope,
                r.theoretical_slope,
                r.log_factor.describe(),
                match r.within_tolerance {
                    Some(true) => " ok",
                    Some(false) => " OUT OF TOLERANCE",
                    None => "",
                }
            );
            for p in &r.points {
                let _ = writeln!(
                    s,
                    "  level={} h={:.4e} n={} rmse={:.4e} degree={} chopped={}",
                    p.level, p.h, p.n_vertices, p.rmse, p.cheb_degree, p.chopped_degree
                );
            }
            if !r.inversions.is_empty() {
                let _ = writeln!(s, "  rmse increased at levels {:?}", r.inversions);
            }
        }
        for (level, d) in &self.projection_defects {
            let _ = writeln!(s, "projection defect {level}->{}: {d:.3e}", level + 1);
        }
        s
    }

    /// Writes `rates.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let csv = dir.join("rates.csv");
        fs::write(&csv, self.to_csv()).map_err(io(&csv))?;
        let json = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&json, text).map_err(io(&json))
    }
}

/// Runs `f` on a thread pool limited by `SURFIELD_THREADS` when that is set.
pub fn with_thread_limit<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("SURFIELD_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .map_err(|_| Error::Config(format!("SURFIELD_THREADS must be a positive integer, got {v:?}")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Noise on every ladder level, finest first projected down step by step.
fn ladder_noises(ladder: &MeshLadder, ops: &[AssembledOperator], fine: WhiteNoise) -> Result<Vec<WhiteNoise>> {
    let top = ops.len() - 1;
    let mut noises = vec![fine];
    for i in (0..top).rev() {
        let next = project_noise(
            noises.last().unwrap(),
            &ladder.prolongations[i],
            ops[i + 1].sqrt_mass(),
            ops[i].sqrt_mass(),
        )?;
        noises.push(next);
    }
    noises.reverse();
    Ok(noises)
}

/// Runs the strong-error study described by `config`.
pub fn run_convergence(config: &ExperimentConfig) -> Result<RateReport> {
    config.validate()?;
    with_thread_limit(|| run_convergence_inner(config))?
}

fn run_convergence_inner(config: &ExperimentConfig) -> Result<RateReport> {
    let d = config.surface.dim();
    let base_level = *config.levels.iter().min().expect("validated");
    let ladder = MeshLadder::build(config.surface.mesh(base_level)?, config.fine_level - base_level)?;
    let coeffs = config.coeffs.build(d)?;
    let mode = config.mass_mode();
    let ops = ladder
        .meshes
        .iter()
        .map(|m| assemble(m, &coeffs, mode))
        .collect::<Result<Vec<_>>>()?;
    let top = ops.len() - 1;
    let idx = |level: u32| (level - base_level) as usize;

    let projection_defects = (0..top)
        .map(|i| {
            projection_defect(&ladder.prolongations[i], ops[i + 1].mass(), ops[i].sqrt_mass())
                .map(|v| (base_level + i as u32, v))
        })
        .collect::<Result<Vec<_>>>()?;

    let cheb = config.chebyshev();
    let mut sample_levels: Vec<u32> = config.levels.clone();
    sample_levels.sort_unstable();
    sample_levels.dedup();
    // polys[a][j]: density a on coarse level j; the last entry is the fine level
    let polys = config
        .alphas
        .iter()
        .map(|&alpha| {
            let density = config.density.with_alpha(alpha);
            sample_levels
                .iter()
                .map(|&l| idx(l))
                .chain([top])
                .map(|i| ChebyshevPoly::for_operator(&ops[i], &density, &cheb))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    info!(
        "{:?}: {} levels, fine n = {}, fine degrees {:?}",
        config.surface,
        ops.len(),
        ops[top].n(),
        polys.iter().map(|p| p.last().unwrap().active_degree()).collect::<Vec<_>>()
    );

    let fine_mass = ops[top].mass();
    // errors[s][a][j]: squared error of sample s
    let errors = (0..config.n_samples)
        .into_par_iter()
        .map(|s| -> Result<Vec<Vec<f64>>> {
            let fine_noise = white_noise(ops[top].n(), config.seed.wrapping_add(s as u64)).at_level(config.fine_level);
            let noises = ladder_noises(&ladder, &ops, fine_noise)?;
            polys
                .iter()
                .map(|ps| {
                    let fine = sample_field(&ops[top], ps.last().unwrap(), &noises[top])?;
                    sample_levels
                        .iter()
                        .zip(ps)
                        .map(|(&l, poly)| {
                            let i = idx(l);
                            let coarse = sample_field(&ops[i], poly, &noises[i])?;
                            let up = ladder.prolong(i, top, &coarse.nodal_weights)?;
                            let e: Vec<f64> = fine.nodal_weights.iter().zip(&up).map(|(f, c)| f - c).collect();
                            Ok(dot(&e, &fine_mass.spmv(&e)?))
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let rates = config
        .alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let points: Vec<RatePoint> = sample_levels
                .iter()
                .enumerate()
                .map(|(j, &l)| {
                    let mse = errors.iter().map(|e| e[a][j]).sum::<f64>() / config.n_samples as f64;
                    let mesh = &ladder.meshes[idx(l)];
                    RatePoint {
                        level: l,
                        h: mesh.nominal_size(),
                        n_vertices: mesh.n_vertices(),
                        rmse: mse.sqrt(),
                        cheb_degree: polys[a][j].degree(),
                        chopped_degree: polys[a][j].active_degree(),
                    }
                })
                .collect();
            let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.h, p.rmse)).collect();
            let slope = if pairs.len() >= 2 { Some(fit_slope(&pairs)?) } else { None };
            let theory = theoretical_slope(alpha, d);
            let inversions = points.windows(2).filter(|w| w[1].rmse > w[0].rmse).map(|w| w[1].level).collect();
            Ok(AlphaRates {
                alpha,
                slope,
                theoretical_slope: theory,
                log_factor: LogFactor::classify(alpha, d),
                inversions,
                within_tolerance: config
                    .slope_tolerance
                    .map(|tol| slope.is_some_and(|s| (s - theory).abs() <= tol)),
                points,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RateReport {
        surface: config.surface,
        dim: d,
        fine_level: config.fine_level,
        n_samples: config.n_samples,
        fine_cheb_degree: polys.iter().map(|p| p.last().unwrap().active_degree()).collect(),
        projection_defects,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_examples() {
        assert!((fit_slope(&[(1.0, 1.0), (2.0, 4.0)]).unwrap() - 2.0).abs() < 1e-14);
        assert!(fit_slope(&[(1.0, 3.0), (2.0, 3.0)]).unwrap().abs() < 1e-14);
        assert!(matches!(fit_slope(&[(1.0, 1.0)]), Err(Error::NotEnoughPoints { .. })));
        let noise = [0.004, -0.007, 0.01, -0.002];
        let pts: Vec<(f64, f64)> = (0..4)
            .map(|k| {
                let h = 2f64.powi(-k);
                (h, h.powf(1.6) * (1.0 + noise[k as usize]))
            })
            .collect();
        assert!((fit_slope(&pts).unwrap() - 1.6).abs() < 0.05);
    }

    #[test]
    fn theoretical_rates() {
        assert!((theoretical_slope(1.05, 1) - 1.6).abs() < 1e-12);
        assert!((theoretical_slope(0.5, 1) - 0.5).abs() < 1e-12);
        assert_eq!(theoretical_slope(1.5, 1), 2.0);
        assert!((theoretical_slope(0.75, 2) - 0.5).abs() < 1e-12);
        assert!((theoretical_slope(1.25, 2) - 1.5).abs() < 1e-12);
        assert_eq!(LogFactor::classify(0.75, 2), LogFactor::Log);
        assert_eq!(LogFactor::classify(1.25, 2), LogFactor::LogThreeHalves);
        assert_eq!(LogFactor::classify(2.25, 2), LogFactor::LogHalf);
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::circle_reference().validate().is_ok());
        assert!(ExperimentConfig::sphere_reference().validate().is_ok());
        let bad = ExperimentConfig {
            fine_level: 9,
            ..ExperimentConfig::circle_reference()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            alphas: vec![0.2],
            ..ExperimentConfig::circle_reference()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            levels: vec![],
            ..ExperimentConfig::circle_reference()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let ok: ExperimentConfig =
            serde_json::from_str(r#"{"surface":"sphere","levels":[1,2],"fine_level":3,"density":{"name":"power","c0":500}}"#)
                .unwrap();
        assert_eq!(ok.surface, Surface::Sphere);
        assert_eq!(ok.n_samples, 25);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"levelz":[1]}"#).is_err());
    }

    #[test]
    fn single_level_run_has_no_slope() {
        let cfg = ExperimentConfig {
            levels: vec![3],
            fine_level: 5,
            alphas: vec![1.5],
            n_samples: 3,
            ..ExperimentConfig::circle_reference()
        };
        let r = run_convergence(&cfg).unwrap();
        assert_eq!(r.rates[0].points.len(), 1);
        assert!(r.rates[0].slope.is_none());
        assert!(r.rates[0].points[0].rmse > 0.0);
    }
}
