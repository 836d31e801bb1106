use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::polyline::{orient, Point};
use crate::error::{Error, Result};

/// Region tag of a triangle.
///
/// Encoded in mesh files as `0` (outer), `1` (inner) and `2 + j` for
/// inclusion `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Outer,
    Inner,
    Inclusion(u16),
}

impl Region {
    pub fn code(self) -> u32 {
        match self {
            Region::Outer => 0,
            Region::Inner => 1,
            Region::Inclusion(j) => 2 + j as u32,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Region::Outer),
            1 => Ok(Region::Inner),
            c if c - 2 <= u16::MAX as u32 => Ok(Region::Inclusion((c - 2) as u16)),
            c => Err(Error::UnknownRegion(c)),
        }
    }

    /// Inner side of the main interface: everything except `Outer`.
    pub fn is_interior(self) -> bool {
        self != Region::Outer
    }
}

/// Conforming triangulation of the truncation box `[-b, b]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<Region>,
    interface_edges: Vec<[usize; 2]>,
    box_half_width: f64,
}

impl TriMesh {
    /// Assembles a mesh from raw arrays and checks its invariants.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        tags: Vec<Region>,
        interface_edges: Vec<[usize; 2]>,
        box_half_width: f64,
    ) -> Result<Self> {
        let mesh = TriMesh {
            vertices,
            triangles,
            tags,
            interface_edges,
            box_half_width,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tags(&self) -> &[Region] {
        &self.tags
    }

    /// Edges of the main interface, oriented with the inner side on the left.
    pub fn interface_edges(&self) -> &[[usize; 2]] {
        &self.interface_edges
    }

    pub fn box_half_width(&self) -> f64 {
        self.box_half_width
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * orient(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Sum of triangle areas whose tag satisfies `pred`.
    pub fn area_where(&self, pred: impl Fn(Region) -> bool) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| pred(self.tags[t]))
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Distinct region tags present, sorted.
    pub fn regions(&self) -> Vec<Region> {
        let mut r: Vec<Region> = self.tags.clone();
        r.sort();
        r.dedup();
        r
    }

    /// True for vertices on the truncation box boundary.
    pub fn is_box_vertex(&self, v: usize) -> bool {
        let b = self.box_half_width * (1.0 - 1e-12);
        let p = self.vertices[v];
        p[0].abs() >= b || p[1].abs() >= b
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| min_angle(self.triangle_points(t)))
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    /// Longest edge over triangles satisfying `pred`.
    pub fn max_edge_where(&self, pred: impl Fn(Region) -> bool) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.triangles.len() {
            if pred(self.tags[t]) {
                let p = self.triangle_points(t);
                for i in 0..3 {
                    h = h.max(super::polyline::dist(p[i], p[(i + 1) % 3]));
                }
            }
        }
        h
    }

    /// Edge -> adjacent triangles (one or two).
    pub fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                map.entry(edge_key(tri[i], tri[(i + 1) % 3])).or_default().push(t);
            }
        }
        map
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if self.tags.len() != self.triangles.len() {
            return Err(Error::Dimension {
                expected: self.triangles.len(),
                got: self.tags.len(),
            });
        }
        if !(self.box_half_width > 0.0) {
            return Err(Error::Geometry("box half-width must be positive".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Geometry(format!("triangle {t} references a missing vertex")));
            }
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::Geometry(format!("triangle {t} is not positively oriented")));
            }
        }
        let adjacency = self.edge_triangles();
        if adjacency.values().any(|ts| ts.len() > 2) {
            return Err(Error::Geometry("non-manifold edge".into()));
        }
        for &[a, b] in &self.interface_edges {
            let ts = adjacency
                .get(&edge_key(a, b))
                .ok_or_else(|| Error::Geometry(format!("interface edge ({a}, {b}) is not a mesh edge")))?;
            let inner = ts.iter().filter(|&&t| self.tags[t].is_interior()).count();
            let outer = ts.iter().filter(|&&t| self.tags[t] == Region::Outer).count();
            if inner != 1 || outer != 1 {
                return Err(Error::Geometry(format!(
                    "interface edge ({a}, {b}) must separate one inner and one outer triangle"
                )));
            }
            let t_in = *ts.iter().find(|&&t| self.tags[t].is_interior()).unwrap();
            let c = self.triangles[t_in]
                .iter()
                .copied()
                .find(|&v| v != a && v != b)
                .unwrap();
            if orient(self.vertices[a], self.vertices[b], self.vertices[c]) <= 0.0 {
                return Err(Error::Geometry(format!(
                    "interface edge ({a}, {b}) does not have the inner side on its left"
                )));
            }
        }
        // every inner/outer contact must be a listed interface edge
        let listed: std::collections::HashSet<_> =
            self.interface_edges.iter().map(|&[a, b]| edge_key(a, b)).collect();
        for (e, ts) in &adjacency {
            if ts.len() == 2 && self.tags[ts[0]].is_interior() != self.tags[ts[1]].is_interior() && !listed.contains(e) {
                return Err(Error::Geometry(format!(
                    "edge {e:?} separates inner and outer but is not an interface edge"
                )));
            }
        }
        Ok(())
    }

    /// Splits every triangle into four through its edge midpoints.
    pub fn refine_uniform(&self) -> TriMesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            *midpoint.entry(edge_key(a, b)).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                // keep box-edge midpoints exactly on the box
                for d in 0..2 {
                    if p[d] == q[d] {
                        m[d] = p[d];
                    }
                }
                vertices.push(m);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut tags = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            tags.extend_from_slice(&[self.tags[t]; 4]);
        }
        let mut interface_edges = Vec::with_capacity(2 * self.interface_edges.len());
        for &[a, b] in &self.interface_edges {
            let m = mid(a, b, &mut vertices);
            interface_edges.push([a, m]);
            interface_edges.push([m, b]);
        }
        TriMesh {
            vertices,
            triangles,
            tags,
            interface_edges,
            box_half_width: self.box_half_width,
        }
    }

    /// Replaces region tags, e.g. to host a second inclusion configuration.
    pub fn with_tags(&self, tags: Vec<Region>) -> Result<TriMesh> {
        TriMesh::new(
            self.vertices.clone(),
            self.triangles.clone(),
            tags,
            self.interface_edges.clone(),
            self.box_half_width,
        )
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn min_angle(p: [Point; 3]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
        m = m.min(cos.clamp(-1.0, 1.0).acos());
    }
    m
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Box [-2,2]^2 split into 8 triangles around the unit square [-1,1]^2.
    pub(crate) fn tiny_mesh() -> TriMesh {
        let vertices = vec![
            [-1.0, -1.0],
            [1.0, -1.0],
            [1.0, 1.0],
            [-1.0, 1.0],
            [-2.0, -2.0],
            [2.0, -2.0],
            [2.0, 2.0],
            [-2.0, 2.0],
        ];
        let triangles = vec![
            [0, 1, 2],
            [0, 2, 3],
            [4, 5, 1],
            [4, 1, 0],
            [5, 6, 2],
            [5, 2, 1],
            [6, 7, 3],
            [6, 3, 2],
            [7, 4, 0],
            [7, 0, 3],
        ];
        let mut tags = vec![Region::Inner; 2];
        tags.extend([Region::Outer; 8]);
        TriMesh::new(
            vertices,
            triangles,
            tags,
            vec![[0, 1], [1, 2], [2, 3], [3, 0]],
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn refinement_quadruples() {
        let m = tiny_mesh();
        let r = m.refine_uniform();
        assert_eq!(r.num_triangles(), 4 * m.num_triangles());
        assert_eq!(r.interface_edges().len(), 2 * m.interface_edges().len());
        r.validate().unwrap();
        let rr = r.refine_uniform();
        assert_eq!(rr.num_triangles(), 16 * m.num_triangles());
        assert!((rr.min_angle_deg() - m.min_angle_deg()).abs() < 1e-9);
        assert!((rr.area_where(Region::is_interior) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn box_vertices_detected() {
        let m = tiny_mesh().refine_uniform();
        let n_box = (0..m.num_vertices()).filter(|&v| m.is_box_vertex(v)).count();
        assert_eq!(n_box, 8);
    }

    #[test]
    fn validation_catches_wrong_orientation() {
        let m = tiny_mesh();
        let mut tri = m.triangles().to_vec();
        tri[0] = [0, 2, 1];
        assert!(TriMesh::new(m.vertices().to_vec(), tri, m.tags().to_vec(), m.interface_edges().to_vec(), 2.0).is_err());
        let mut edges = m.interface_edges().to_vec();
        edges[0] = [1, 0];
        assert!(TriMesh::new(m.vertices().to_vec(), m.triangles().to_vec(), m.tags().to_vec(), edges, 2.0).is_err());
    }

    #[test]
    fn region_codes_round_trip() {
        for r in [Region::Outer, Region::Inner, Region::Inclusion(0), Region::Inclusion(7)] {
            assert_eq!(Region::from_code(r.code()).unwrap(), r);
        }
    }
}
