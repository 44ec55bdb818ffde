//! Polyhedral approximations of closed curves and surfaces.
//!
//! Circles (d = 1) live in the `z = 0` plane of R³ so that every mesh shares
//! the same point type. Unit circle and unit sphere meshes carry their
//! refinement level and can be refined into nested ladders together with the
//! nodal prolongation between consecutive levels.

mod io;

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

pub use io::{load_off, read_ply_values, write_off, write_ply};

pub type Point = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    UnitCircle,
    UnitSphere,
    Generic,
}

/// Triangulated closed hypersurface: segments for d = 1, triangles for d = 2.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    level: Option<u32>,
    kind: SurfaceKind,
}

/// Nodal interpolation from a coarse mesh onto its refinement (`fine_n × coarse_n`).
#[derive(Debug, Clone)]
pub struct Prolongation {
    pub coarse_n: usize,
    pub fine_n: usize,
    pub matrix: SparseMatrix,
}

impl Prolongation {
    /// Interpolates coarse nodal values onto the fine vertices.
    pub fn apply(&self, coarse: &[f64]) -> Result<Vec<f64>> {
        self.matrix.spmv(coarse)
    }

    /// `Pᵀ y`.
    pub fn restrict(&self, fine: &[f64]) -> Result<Vec<f64>> {
        self.matrix.spmv_transpose(fine)
    }
}

impl SurfaceMesh {
    /// Builds a mesh and checks non-degeneracy and closedness.
    ///
    /// `cells` is flat with stride `dim + 1`.
    pub fn new(
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<usize>,
        kind: SurfaceKind,
        level: Option<u32>,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidMesh(format!("unsupported dimension {dim}")));
        }
        if cells.is_empty() || cells.len() % (dim + 1) != 0 {
            return Err(Error::InvalidMesh(format!(
                "cell array length {} is not a positive multiple of {}",
                cells.len(),
                dim + 1
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::InvalidMesh(format!(
                "vertex index {bad} out of range ({} vertices)",
                vertices.len()
            )));
        }
        let mesh = Self {
            dim,
            vertices,
            cells,
            level,
            kind,
        };
        mesh.check_non_degenerate()?;
        mesh.check_closed()?;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn level(&self) -> Option<u32> {
        self.level
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_simplices(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn simplex(&self, i: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.cells[i * s..(i + 1) * s]
    }

    pub fn simplices(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.dim + 1)
    }

    /// Length (d = 1) or area (d = 2) of simplex `i`.
    pub fn simplex_measure(&self, i: usize) -> f64 {
        let s = self.simplex(i);
        let p = |k: usize| self.vertices[s[k]];
        match self.dim {
            1 => (p(1) - p(0)).norm(),
            _ => 0.5 * (p(1) - p(0)).cross(&(p(2) - p(0))).norm(),
        }
    }

    pub fn simplex_centroid(&self, i: usize) -> Point {
        let s = self.simplex(i);
        s.iter().map(|&v| self.vertices[v]).sum::<Point>() / s.len() as f64
    }

    /// Total length or area of the polyhedral surface.
    pub fn total_measure(&self) -> f64 {
        (0..self.n_simplices()).map(|i| self.simplex_measure(i)).sum()
    }

    /// Number of distinct edges (d = 2) or segments (d = 1).
    pub fn n_edges(&self) -> usize {
        match self.dim {
            1 => self.n_simplices(),
            _ => self.face_incidence().len(),
        }
    }

    /// Mesh size h: the largest in-ball radius over all simplices.
    ///
    /// Half the segment length for d = 1, `2·Area / perimeter` for d = 2.
    pub fn mesh_size(&self) -> f64 {
        (0..self.n_simplices())
            .map(|i| self.inradius(i))
            .fold(0.0, f64::max)
    }

    fn inradius(&self, i: usize) -> f64 {
        let s = self.simplex(i);
        let p = |k: usize| self.vertices[s[k]];
        match self.dim {
            1 => 0.5 * (p(1) - p(0)).norm(),
            _ => {
                let perimeter = (p(1) - p(0)).norm() + (p(2) - p(1)).norm() + (p(0) - p(2)).norm();
                2.0 * self.simplex_measure(i) / perimeter
            }
        }
    }

    /// Level-based mesh size label: `π·2^{-k}` for circles; measured size otherwise.
    pub fn nominal_size(&self) -> f64 {
        match (self.kind, self.level) {
            (SurfaceKind::UnitCircle, Some(k)) => PI * 2f64.powi(-(k as i32)),
            _ => self.mesh_size(),
        }
    }

    pub fn closest_point(&self, x: &Point) -> Result<Point> {
        closest_point(self.kind, x)
    }

    /// Unit normal of simplex `i` in the plane of the curve (d = 1) or of the triangle (d = 2),
    /// oriented away from the origin.
    pub fn simplex_normal(&self, i: usize) -> Point {
        let s = self.simplex(i);
        let p = |k: usize| self.vertices[s[k]];
        let n = match self.dim {
            1 => {
                let t = p(1) - p(0);
                Point::new(t.y, -t.x, 0.0)
            }
            _ => (p(1) - p(0)).cross(&(p(2) - p(0))),
        };
        let n = n.normalize();
        if n.dot(&self.simplex_centroid(i)) < 0.0 {
            -n
        } else {
            n
        }
    }

    /// Vertex normals: `closest_point` direction for unit kinds, averaged simplex normals otherwise.
    pub fn vertex_normals(&self) -> Vec<Point> {
        match self.kind {
            SurfaceKind::Generic => {
                let mut acc = vec![Point::zeros(); self.n_vertices()];
                for i in 0..self.n_simplices() {
                    let n = self.simplex_normal(i) * self.simplex_measure(i);
                    for &v in self.simplex(i) {
                        acc[v] += n;
                    }
                }
                acc.into_iter().map(|n| n.normalize()).collect()
            }
            _ => self.vertices.iter().map(|v| v.normalize()).collect(),
        }
    }

    fn check_non_degenerate(&self) -> Result<()> {
        let scale = self
            .vertices
            .iter()
            .fold(0.0f64, |m, v| m.max(v.amax()))
            .max(1.0);
        let tol = 1e-14 * scale.powi(self.dim as i32);
        for i in 0..self.n_simplices() {
            let m = self.simplex_measure(i);
            if !(m > tol) {
                return Err(Error::DegenerateSimplex { index: i, measure: m });
            }
        }
        Ok(())
    }

    /// Map from sorted (d-1)-faces to incidence counts.
    fn face_incidence(&self) -> HashMap<Vec<usize>, usize> {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for s in self.simplices() {
            match self.dim {
                1 => {
                    for &v in s {
                        *count.entry(vec![v]).or_default() += 1;
                    }
                }
                _ => {
                    for k in 0..3 {
                        let (a, b) = (s[k], s[(k + 1) % 3]);
                        *count.entry(vec![a.min(b), a.max(b)]).or_default() += 1;
                    }
                }
            }
        }
        count
    }

    fn check_closed(&self) -> Result<()> {
        let count = self.face_incidence();
        let mut bad: Vec<_> = count.into_iter().filter(|(_, c)| *c != 2).collect();
        bad.sort();
        if let Some((face, count)) = bad.into_iter().next() {
            return Err(Error::NonClosedSurface { face, count });
        }
        if self.dim == 2 {
            let mut used = vec![false; self.n_vertices()];
            for &v in &self.cells {
                used[v] = true;
            }
            if let Some(v) = used.iter().position(|u| !u) {
                return Err(Error::InvalidMesh(format!("vertex {v} is not used by any face")));
            }
        }
        Ok(())
    }
}

/// Projection onto the exact surface: `x/‖x‖` for the unit kinds, identity otherwise.
pub fn closest_point(kind: SurfaceKind, x: &Point) -> Result<Point> {
    match kind {
        SurfaceKind::Generic => Ok(*x),
        _ => {
            let n = x.norm();
            if n == 0.0 {
                return Err(Error::DegeneratePoint);
            }
            Ok(x / n)
        }
    }
}

/// Regular inscribed polygon with `2^{k+1}` vertices; nominal size `π·2^{-k}`.
pub fn generate_circle(level: u32) -> Result<SurfaceMesh> {
    if level < 1 {
        return Err(Error::InvalidMesh("circle level must be at least 1".into()));
    }
    let n = 1usize << (level + 1);
    let vertices = (0..n)
        .map(|i| {
            let t = TAU * i as f64 / n as f64;
            Point::new(t.cos(), t.sin(), 0.0)
        })
        .collect();
    let cells = (0..n).flat_map(|i| [i, (i + 1) % n]).collect();
    SurfaceMesh::new(1, vertices, cells, SurfaceKind::UnitCircle, Some(level))
}

fn icosahedron() -> SurfaceMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices = Vec::with_capacity(12);
    for a in [-1.0, 1.0] {
        for b in [-phi, phi] {
            vertices.push(Point::new(0.0, a, b));
            vertices.push(Point::new(a, b, 0.0));
            vertices.push(Point::new(b, 0.0, a));
        }
    }
    vertices.sort_by(|p, q| {
        p.x.total_cmp(&q.x)
            .then(p.y.total_cmp(&q.y))
            .then(p.z.total_cmp(&q.z))
    });
    // faces are the triples of mutually adjacent vertices at edge length 2
    let adjacent = |i: usize, j: usize| ((vertices[i] - vertices[j]).norm() - 2.0).abs() < 1e-9;
    let mut cells = Vec::with_capacity(60);
    for i in 0..12 {
        for j in (i + 1)..12 {
            for k in (j + 1)..12 {
                if adjacent(i, j) && adjacent(j, k) && adjacent(i, k) {
                    let n = (vertices[j] - vertices[i]).cross(&(vertices[k] - vertices[i]));
                    if n.dot(&vertices[i]) > 0.0 {
                        cells.extend([i, j, k]);
                    } else {
                        cells.extend([i, k, j]);
                    }
                }
            }
        }
    }
    let vertices = vertices.into_iter().map(|v| v.normalize()).collect();
    SurfaceMesh::new(2, vertices, cells, SurfaceKind::UnitSphere, Some(0)).expect("icosahedron is valid")
}

/// Icosphere at level `k`: `10·4^k + 2` vertices, `20·4^k` faces.
pub fn generate_icosphere(level: u32) -> Result<SurfaceMesh> {
    let mut mesh = icosahedron();
    for _ in 0..level {
        mesh = refine(&mesh)?.0;
    }
    Ok(mesh)
}

/// One level of uniform refinement with the coarse-to-fine nodal interpolation.
///
/// Coarse vertices keep their coordinates. For circles the fine mesh is
/// exactly `generate_circle(k + 1)` (coarse vertex `i` becomes fine vertex
/// `2i`); for spheres the edge midpoints are appended after the coarse
/// vertices and projected radially.
pub fn refine(mesh: &SurfaceMesh) -> Result<(SurfaceMesh, Prolongation)> {
    match mesh.kind {
        SurfaceKind::UnitCircle => refine_circle(mesh),
        SurfaceKind::UnitSphere => refine_sphere(mesh),
        SurfaceKind::Generic => Err(Error::UnsupportedRefinement),
    }
}

fn refine_circle(mesh: &SurfaceMesh) -> Result<(SurfaceMesh, Prolongation)> {
    let level = mesh.level.ok_or(Error::UnsupportedRefinement)?;
    let coarse_n = mesh.n_vertices();
    if coarse_n != 1usize << (level + 1) {
        return Err(Error::UnsupportedRefinement);
    }
    let fine = generate_circle(level + 1)?;
    let fine_n = fine.n_vertices();
    let mut t = Vec::with_capacity(3 * coarse_n);
    for i in 0..coarse_n {
        t.push((2 * i, i, 1.0));
        t.push((2 * i + 1, i, 0.5));
        t.push((2 * i + 1, (i + 1) % coarse_n, 0.5));
    }
    let matrix = SparseMatrix::from_triplets(fine_n, coarse_n, t)?;
    Ok((
        fine,
        Prolongation {
            coarse_n,
            fine_n,
            matrix,
        },
    ))
}

fn refine_sphere(mesh: &SurfaceMesh) -> Result<(SurfaceMesh, Prolongation)> {
    let coarse_n = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut parents: Vec<(usize, usize)> = Vec::new();
    let mut cells = Vec::with_capacity(4 * mesh.cells.len());
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
            parents.push(key);
            vertices.len() - 1
        })
    };
    for s in mesh.cells.chunks(3) {
        let (a, b, c) = (s[0], s[1], s[2]);
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        cells.extend([a, ab, ca, ab, b, bc, ca, bc, c, ab, bc, ca]);
    }
    let fine_n = vertices.len();
    let mut t = Vec::with_capacity(coarse_n + 2 * parents.len());
    t.extend((0..coarse_n).map(|i| (i, i, 1.0)));
    for (k, &(a, b)) in parents.iter().enumerate() {
        t.push((coarse_n + k, a, 0.5));
        t.push((coarse_n + k, b, 0.5));
    }
    let matrix = SparseMatrix::from_triplets(fine_n, coarse_n, t)?;
    let fine = SurfaceMesh::new(
        2,
        vertices,
        cells,
        SurfaceKind::UnitSphere,
        mesh.level.map(|k| k + 1),
    )?;
    Ok((
        fine,
        Prolongation {
            coarse_n,
            fine_n,
            matrix,
        },
    ))
}

/// A nested ladder of meshes from `coarsest` to `finest` with the prolongations between them.
#[derive(Debug, Clone)]
pub struct MeshLadder {
    pub meshes: Vec<SurfaceMesh>,
    /// `prolongations[i]` maps level `i` onto level `i + 1` of `meshes`.
    pub prolongations: Vec<Prolongation>,
}

impl MeshLadder {
    pub fn build(base: SurfaceMesh, steps: u32) -> Result<Self> {
        let mut meshes = vec![base];
        let mut prolongations = Vec::new();
        for _ in 0..steps {
            let (fine, p) = refine(meshes.last().unwrap())?;
            meshes.push(fine);
            prolongations.push(p);
        }
        Ok(Self {
            meshes,
            prolongations,
        })
    }

    /// Interpolates nodal values from ladder index `from` up to ladder index `to`.
    pub fn prolong(&self, from: usize, to: usize, values: &[f64]) -> Result<Vec<f64>> {
        let mut v = values.to_vec();
        for p in &self.prolongations[from..to] {
            v = p.apply(&v)?;
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_level_one_is_square() {
        let m = generate_circle(1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_simplices(), 4);
        assert!((m.mesh_size() - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn circle_level_two_perimeter() {
        let m = generate_circle(2).unwrap();
        assert_eq!(m.n_vertices(), 8);
        let expected = 8.0 * 2.0 * (PI / 8.0).sin();
        assert!((m.total_measure() - expected).abs() < 1e-14);
    }

    #[test]
    fn circle_nominal_size_matches_ladder_label() {
        let m = generate_circle(13).unwrap();
        assert_eq!(m.nominal_size(), 2f64.powi(-13) * PI);
        assert_eq!(m.n_vertices(), 1 << 14);
    }

    #[test]
    fn icosphere_counts() {
        let m0 = generate_icosphere(0).unwrap();
        assert_eq!((m0.n_vertices(), m0.n_simplices()), (12, 20));
        let m2 = generate_icosphere(2).unwrap();
        assert_eq!((m2.n_vertices(), m2.n_simplices()), (162, 320));
        assert_eq!(m2.level(), Some(2));
    }

    #[test]
    fn icosphere_is_outward_oriented() {
        let m = generate_icosphere(1).unwrap();
        for i in 0..m.n_simplices() {
            let s = m.simplex(i);
            let v = m.vertices();
            let n = (v[s[1]] - v[s[0]]).cross(&(v[s[2]] - v[s[0]]));
            assert!(n.dot(&m.simplex_centroid(i)) > 0.0);
        }
    }

    #[test]
    fn equilateral_inradius() {
        let s = 0.7;
        let h = s * 3f64.sqrt() / 2.0;
        // closed double-sided triangle pair is degenerate as a surface; use a tetrahedron face instead
        let verts = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(s, 0.0, 0.0),
            Point::new(s / 2.0, h, 0.0),
            Point::new(s / 2.0, h / 3.0, s * (2f64 / 3.0).sqrt()),
        ];
        let cells = vec![0, 2, 1, 0, 1, 3, 1, 2, 3, 2, 0, 3];
        let m = SurfaceMesh::new(2, verts, cells, SurfaceKind::Generic, None).unwrap();
        assert!((m.mesh_size() - s / (2.0 * 3f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn refine_circle_prolongation() {
        let c = generate_circle(1).unwrap();
        let (f, p) = refine(&c).unwrap();
        assert_eq!(f.n_vertices(), 8);
        assert_eq!((p.matrix.n_rows(), p.matrix.n_cols()), (8, 4));
        for i in 0..4 {
            assert_eq!(p.matrix.row(2 * i).0, &[i]);
            assert_eq!(f.vertices()[2 * i], c.vertices()[i]);
        }
        assert_eq!(p.apply(&[1.0; 4]).unwrap(), vec![1.0; 8]);
    }

    #[test]
    fn prolonged_hat_is_kronecker_on_coarse_vertices() {
        let c = generate_icosphere(1).unwrap();
        let (_, p) = refine(&c).unwrap();
        for k in [0, 5, 41] {
            let mut hat = vec![0.0; c.n_vertices()];
            hat[k] = 1.0;
            let fine = p.apply(&hat).unwrap();
            for i in 0..c.n_vertices() {
                assert_eq!(fine[i], if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn generic_refinement_rejected() {
        let c = generate_icosphere(0).unwrap();
        let g = SurfaceMesh::new(2, c.vertices().to_vec(), c.cells.clone(), SurfaceKind::Generic, None).unwrap();
        assert!(matches!(refine(&g), Err(Error::UnsupportedRefinement)));
    }

    #[test]
    fn closest_point_cases() {
        let p = closest_point(SurfaceKind::UnitCircle, &Point::new(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(p, Point::new(1.0, 0.0, 0.0));
        let p = closest_point(SurfaceKind::UnitSphere, &Point::new(0.0, 0.0, -3.0)).unwrap();
        assert_eq!(p, Point::new(0.0, 0.0, -1.0));
        assert!(matches!(
            closest_point(SurfaceKind::UnitSphere, &Point::zeros()),
            Err(Error::DegeneratePoint)
        ));
        let m = generate_icosphere(2).unwrap();
        let q = m.closest_point(&m.simplex_centroid(17)).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn open_curve_rejected() {
        let v = vec![Point::new(0.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0), Point::new(1.0, 1.0, 0.0)];
        let err = SurfaceMesh::new(1, v, vec![0, 1, 1, 2], SurfaceKind::Generic, None).unwrap_err();
        assert!(matches!(err, Error::NonClosedSurface { count: 1, .. }));
    }
}
