use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point, SurfaceKind, SurfaceMesh};
use crate::error::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads an ASCII OFF file with triangular faces as a generic d = 2 mesh.
pub fn load_off(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_off(&text, path)
}

fn parse_off(text: &str, path: &Path) -> Result<SurfaceMesh> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (no, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    // counts may follow the keyword on the same line
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| parse_err(no, format!("expected 'OFF' header, found '{header}'")))?
        .trim();
    let (no, counts) = if rest.is_empty() {
        lines
            .next()
            .ok_or_else(|| parse_err(no + 1, "missing counts line".into()))?
    } else {
        (no, rest)
    };
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(no, format!("invalid count '{t}'"))))
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(parse_err(no, "counts line needs vertex and face counts".into()));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("expected {nv} vertices")))?;
        let xs: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(no, format!("invalid coordinate '{t}'"))))
            .collect::<Result<_>>()?;
        if xs.len() < 3 {
            return Err(parse_err(no, "vertex needs three coordinates".into()));
        }
        vertices.push(Point::new(xs[0], xs[1], xs[2]));
    }
    let mut cells = Vec::with_capacity(3 * nf);
    for _ in 0..nf {
        let (no, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("expected {nf} faces")))?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(no, format!("invalid index '{t}'"))))
            .collect::<Result<_>>()?;
        if ids.first() != Some(&3) || ids.len() < 4 {
            return Err(parse_err(no, "only triangular faces ('3 a b c') are supported".into()));
        }
        if let Some(&bad) = ids[1..4].iter().find(|&&v| v >= nv) {
            return Err(parse_err(no, format!("vertex index {bad} out of range")));
        }
        cells.extend_from_slice(&ids[1..4]);
    }
    SurfaceMesh::new(2, vertices, cells, SurfaceKind::Generic, None)
}

/// Writes a d = 2 mesh as ASCII OFF.
pub fn write_off(path: impl AsRef<Path>, mesh: &SurfaceMesh) -> Result<()> {
    let path = path.as_ref();
    if mesh.dim() != 2 {
        return Err(Error::InvalidMesh("OFF output requires a triangle mesh".into()));
    }
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", mesh.n_vertices(), mesh.n_simplices());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for t in mesh.simplices() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    fs::write(path, s).map_err(io_err(path))
}

/// Writes an ASCII PLY with a `value` property per vertex.
///
/// Triangles go into `element face`; segments (d = 1) into `element edge`.
pub fn write_ply(path: impl AsRef<Path>, mesh: &SurfaceMesh, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    crate::error::check_len(mesh.n_vertices(), values.len())?;
    let mut s = String::new();
    let _ = writeln!(s, "ply\nformat ascii 1.0\ncomment surfield field sample");
    let _ = writeln!(s, "element vertex {}", mesh.n_vertices());
    for p in ["x", "y", "z", "value"] {
        let _ = writeln!(s, "property double {p}");
    }
    if mesh.dim() == 2 {
        let _ = writeln!(s, "element face {}", mesh.n_simplices());
        let _ = writeln!(s, "property list uchar int vertex_indices");
    } else {
        let _ = writeln!(s, "element edge {}", mesh.n_simplices());
        let _ = writeln!(s, "property int vertex1\nproperty int vertex2");
    }
    let _ = writeln!(s, "end_header");
    for (v, val) in mesh.vertices().iter().zip(values) {
        let _ = writeln!(s, "{:?} {:?} {:?} {:?}", v.x, v.y, v.z, val);
    }
    for c in mesh.simplices() {
        if mesh.dim() == 2 {
            let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
        } else {
            let _ = writeln!(s, "{} {}", c[0], c[1]);
        }
    }
    fs::write(path, s).map_err(io_err(path))
}

/// Reads back the vertex positions and per-vertex values of an ASCII PLY written by [`write_ply`].
pub fn read_ply_values(path: impl AsRef<Path>) -> Result<(Vec<Point>, Vec<f64>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut n_vertices = None;
    for (no, l) in lines.by_ref() {
        if let Some(n) = l.strip_prefix("element vertex ") {
            n_vertices = Some(n.trim().parse::<usize>().map_err(|_| parse_err(no, "bad vertex count".into()))?);
        }
        if l == "end_header" {
            break;
        }
    }
    let n = n_vertices.ok_or_else(|| parse_err(0, "missing 'element vertex'".into()))?;
    let mut points = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, l) = lines.next().ok_or_else(|| parse_err(0, "truncated vertex list".into()))?;
        let xs: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(no, format!("invalid number '{t}'"))))
            .collect::<Result<_>>()?;
        if xs.len() != 4 {
            return Err(parse_err(no, "expected x y z value".into()));
        }
        points.push(Point::new(xs[0], xs[1], xs[2]));
        values.push(xs[3]);
    }
    Ok((points, values))
}
