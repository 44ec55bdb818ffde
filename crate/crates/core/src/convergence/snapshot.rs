use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DensitySpec, Surface};
use crate::assembly::{assemble, MassMode};
use crate::chebyshev::{ChebyshevConfig, ChebyshevPoly};
use crate::coefficients::{spherical_angles, Preset};
use crate::error::{Error, Result};
use crate::mesh::{write_ply, SurfaceKind, SurfaceMesh};
use crate::sampler::{sample_field, white_noise};

/// One field sample to be written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSpec {
    pub surface: Surface,
    pub level: u32,
    pub density: DensitySpec,
    pub alpha: f64,
    /// Defaults to the Whittle-Matérn operator for Matérn densities and to
    /// the surface's experiment preset otherwise.
    pub coeffs: Option<Preset>,
    pub seed: u64,
    pub mass_mode: Option<MassMode>,
    pub epsilon: f64,
    pub c_v_scale: f64,
}

impl SnapshotSpec {
    pub fn new(surface: Surface, level: u32, density: DensitySpec, alpha: f64, seed: u64) -> Self {
        Self {
            surface,
            level,
            density,
            alpha,
            coeffs: None,
            seed,
            mass_mode: None,
            epsilon: 1e-12,
            c_v_scale: 1.0,
        }
    }

    pub fn preset(&self) -> Preset {
        self.coeffs.clone().unwrap_or(match self.density {
            DensitySpec::Matern { kappa2 } => Preset::Matern { kappa2 },
            _ => self.surface.experiment_preset(),
        })
    }
}

/// Paths written by [`snapshot`].
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFiles {
    pub ply: PathBuf,
    /// Circle only: `(theta, value)` table.
    pub csv: Option<PathBuf>,
    /// Circle only: curve displaced along the normal in proportion to the value.
    pub offset_ply: Option<PathBuf>,
    pub values: Vec<f64>,
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Samples one field and writes it as a PLY with a per-vertex `value`.
pub fn snapshot(spec: &SnapshotSpec, out: impl AsRef<Path>) -> Result<SnapshotFiles> {
    let out = out.as_ref();
    let d = spec.surface.dim();
    let mesh = spec.surface.mesh(spec.level)?;
    let coeffs = spec.preset().build(d)?;
    let op = assemble(&mesh, &coeffs, spec.mass_mode.unwrap_or(MassMode::default_for(d)))?;
    let density = spec.density.with_alpha(spec.alpha);
    let cheb = ChebyshevConfig {
        epsilon: spec.epsilon,
        c_v_scale: spec.c_v_scale,
        ..Default::default()
    };
    let poly = ChebyshevPoly::for_operator(&op, &density, &cheb)?;
    let values = sample_field(&op, &poly, &white_noise(op.n(), spec.seed))?.nodal_weights;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    write_ply(out, &mesh, &values)?;
    let mut files = SnapshotFiles {
        ply: out.to_path_buf(),
        csv: None,
        offset_ply: None,
        values,
    };
    if spec.surface == Surface::Circle {
        let csv = sibling(out, "", "csv");
        let mut s = String::from("theta,value\n");
        for (p, v) in mesh.vertices().iter().zip(&files.values) {
            let _ = writeln!(s, "{:?},{:?}", spherical_angles(p).1, v);
        }
        fs::write(&csv, s).map_err(|source| Error::Io {
            path: csv.clone(),
            source,
        })?;
        let offset = sibling(out, "_offset", "ply");
        write_ply(&offset, &offset_curve(&mesh, &files.values)?, &files.values)?;
        files.csv = Some(csv);
        files.offset_ply = Some(offset);
    }
    Ok(files)
}

/// Vertices moved along their normals by `0.25 · value / max|value|`.
fn offset_curve(mesh: &SurfaceMesh, values: &[f64]) -> Result<SurfaceMesh> {
    let vmax = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let scale = if vmax > 0.0 { 0.25 / vmax } else { 0.0 };
    let vertices = mesh
        .vertices()
        .iter()
        .zip(mesh.vertex_normals())
        .zip(values)
        .map(|((p, n), v)| p + n * (scale * v))
        .collect();
    let cells = mesh.simplices().flatten().copied().collect();
    SurfaceMesh::new(mesh.dim(), vertices, cells, SurfaceKind::Generic, mesh.level())
}
