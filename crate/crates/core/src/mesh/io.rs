//! Plain-text mesh format.
//!
//! ```text
//! tsmesh 1
//! <nv> <nt> <ne>
//! x y                 (nv lines)
//! i j k tag           (nt lines)
//! a b                 (ne interface edges)
//! ```
//!
//! Indices are 0-based and coordinates are written with 17 significant
//! digits so a write/read cycle is lossless. The box half-width is recovered
//! as the largest coordinate magnitude (box corners are always vertices); an
//! optional fourth field on the count line overrides it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::trimesh::{Region, TriMesh};
use crate::error::{Error, Result};

const MAGIC: &str = "tsmesh 1";

pub fn write_mesh(mesh: &TriMesh, path: &Path) -> Result<()> {
    fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn mesh_to_string(mesh: &TriMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.interface_edges().len()
    );
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:.16e} {:.16e}", p[0], p[1]);
    }
    for (tri, tag) in mesh.triangles().iter().zip(mesh.tags()) {
        let _ = writeln!(out, "{} {} {} {}", tri[0], tri[1], tri[2], tag.code());
    }
    for e in mesh.interface_edges() {
        let _ = writeln!(out, "{} {}", e[0], e[1]);
    }
    out
}

pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let text = fs::read_to_string(path)?;
    parse_mesh(&text, path)
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<TriMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path: path.to_path_buf(),
        last: 0,
    };
    let (no, header) = lines.next_line("header")?;
    if header.trim() != MAGIC {
        return Err(lines.error(no, format!("expected header '{MAGIC}', found '{}'", header.trim())));
    }
    let (no, counts) = lines.next_line("counts")?;
    let fields: Vec<&str> = counts.split_whitespace().collect();
    if fields.len() != 3 && fields.len() != 4 {
        return Err(lines.error(no, "expected '<nv> <nt> <ne>'".into()));
    }
    let nv: usize = lines.parse(no, fields[0])?;
    let nt: usize = lines.parse(no, fields[1])?;
    let ne: usize = lines.parse(no, fields[2])?;
    let box_half_width: Option<f64> = match fields.get(3) {
        Some(s) => Some(lines.parse(no, s)?),
        None => None,
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, l) = lines.next_line("vertices")?;
        let v = lines.numbers::<f64>(no, l, 2)?;
        vertices.push([v[0], v[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut tags = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (no, l) = lines.next_line("triangles")?;
        let v = lines.numbers::<usize>(no, l, 4)?;
        if v[..3].iter().any(|&i| i >= nv) {
            return Err(lines.error(no, "vertex index out of range".into()));
        }
        triangles.push([v[0], v[1], v[2]]);
        tags.push(Region::from_code(v[3] as u32).map_err(|e| lines.error(no, e.to_string()))?);
    }
    let mut edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (no, l) = lines.next_line("interface edges")?;
        let v = lines.numbers::<usize>(no, l, 2)?;
        edges.push([v[0], v[1]]);
    }
    let bw = box_half_width.unwrap_or_else(|| {
        vertices
            .iter()
            .flat_map(|p| [p[0].abs(), p[1].abs()])
            .fold(0.0, f64::max)
    });
    TriMesh::new(vertices, triangles, tags, edges, bw).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: lines.last,
        message: format!("invalid mesh: {e}"),
    })
}

struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: I,
    path: PathBuf,
    last: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    fn next_line(&mut self, section: &str) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                Some((i, l)) if l.trim().is_empty() => self.last = i + 1,
                Some((i, l)) => {
                    self.last = i + 1;
                    return Ok((i + 1, l));
                }
                None => {
                    return Err(self.error(
                        self.last + 1,
                        format!("unexpected end of file: missing {section} section"),
                    ))
                }
            }
        }
    }

    fn error(&self, line: usize, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message,
        }
    }

    fn parse<T: std::str::FromStr>(&self, line: usize, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.error(line, format!("cannot parse '{s}'")))
    }

    fn numbers<T: std::str::FromStr>(&self, line: usize, l: &str, n: usize) -> Result<Vec<T>> {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != n {
            return Err(self.error(line, format!("expected {n} fields, found {}", parts.len())));
        }
        parts.iter().map(|s| self.parse(line, s)).collect()
    }
}
