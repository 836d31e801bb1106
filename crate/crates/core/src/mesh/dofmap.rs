use std::collections::HashMap;

use super::trimesh::{edge_key, Region, TriMesh};
use crate::error::{Error, Result};

/// Which side of an interface a quantity lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Inner,
    Outer,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Inner => "inner",
            Side::Outer => "outer",
        }
    }
}

/// Degree-of-freedom layout of the two-sided P1 space.
///
/// Vertex `v` owns DOF `v`. Every interface vertex additionally owns an
/// outer DOF `nv + i`, where `i` is its position in the interface order, so
/// triangles on the outer side see a copy of the interface that can jump.
/// Restricting to the first `nv` DOFs ("identified view") gives the
/// continuous P1 space.
#[derive(Debug, Clone)]
pub struct TwoSidedDofMap {
    n_vertices: usize,
    inside: Vec<bool>,
    interface_nodes: Vec<usize>,
    interface_slot: Vec<Option<usize>>,
    box_vertex: Vec<bool>,
    triangles: Vec<[usize; 3]>,
}

/// DOF map for the main interface: the inner side is every non-`Outer` tag.
pub fn build_dof_map(mesh: &TriMesh) -> Result<TwoSidedDofMap> {
    TwoSidedDofMap::with_inside(mesh, Region::is_interior)
}

impl TwoSidedDofMap {
    /// DOF map for the interface enclosing the triangles selected by `inside`.
    ///
    /// The selected region must be bounded by a single closed curve that
    /// stays off the truncation box.
    pub fn with_inside(mesh: &TriMesh, inside: impl Fn(Region) -> bool) -> Result<Self> {
        let nv = mesh.num_vertices();
        let inside: Vec<bool> = mesh.tags().iter().map(|&r| inside(r)).collect();
        if !inside.iter().any(|&b| b) || inside.iter().all(|&b| b) {
            return Err(Error::Geometry("inner side must be a proper, nonempty subset".into()));
        }
        // interface edges oriented with the inside triangle on the left
        let mut next: HashMap<usize, usize> = HashMap::new();
        for (e, ts) in mesh.edge_triangles() {
            if ts.len() == 2 && inside[ts[0]] != inside[ts[1]] {
                let t_in = if inside[ts[0]] { ts[0] } else { ts[1] };
                let tri = mesh.triangles()[t_in];
                let k = tri.iter().position(|&v| v != e.0 && v != e.1).unwrap();
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                if next.insert(a, b).is_some() {
                    return Err(Error::Geometry(format!(
                        "interface is not a simple closed curve at vertex {a}"
                    )));
                }
            } else if ts.len() == 1 && inside[ts[0]] {
                return Err(Error::Geometry("inner side touches the truncation box".into()));
            }
        }
        let anchor = *next
            .keys()
            .min_by(|&&a, &&b| {
                let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
                p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
            })
            .ok_or_else(|| Error::Geometry("empty interface".into()))?;
        let mut interface_nodes = vec![anchor];
        let mut v = next[&anchor];
        while v != anchor {
            if interface_nodes.len() > next.len() {
                return Err(Error::Geometry("interface traversal does not close".into()));
            }
            interface_nodes.push(v);
            v = *next
                .get(&v)
                .ok_or_else(|| Error::Geometry(format!("interface breaks at vertex {v}")))?;
        }
        if interface_nodes.len() != next.len() {
            return Err(Error::Geometry(format!(
                "interface has several components ({} of {} vertices reached)",
                interface_nodes.len(),
                next.len()
            )));
        }
        let mut interface_slot = vec![None; nv];
        for (i, &v) in interface_nodes.iter().enumerate() {
            interface_slot[v] = Some(i);
        }
        let box_vertex = (0..nv).map(|v| mesh.is_box_vertex(v)).collect();
        Ok(TwoSidedDofMap {
            n_vertices: nv,
            inside,
            interface_nodes,
            interface_slot,
            box_vertex,
            triangles: mesh.triangles().to_vec(),
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.n_vertices + self.interface_nodes.len()
    }

    /// DOF count of the identified (continuous) view.
    pub fn num_identified(&self) -> usize {
        self.n_vertices
    }

    pub fn num_interface(&self) -> usize {
        self.interface_nodes.len()
    }

    /// Interface vertices in traversal order, starting at the
    /// lexicographically smallest one and running counterclockwise.
    pub fn interface_nodes(&self) -> &[usize] {
        &self.interface_nodes
    }

    pub fn interface_slot(&self, v: usize) -> Option<usize> {
        self.interface_slot[v]
    }

    pub fn is_box_vertex(&self, v: usize) -> bool {
        self.box_vertex[v]
    }

    pub fn triangle_side(&self, t: usize) -> Side {
        if self.inside[t] {
            Side::Inner
        } else {
            Side::Outer
        }
    }

    /// DOF of vertex `v` as seen from `side`.
    pub fn dof(&self, v: usize, side: Side) -> usize {
        match (side, self.interface_slot[v]) {
            (Side::Outer, Some(i)) => self.n_vertices + i,
            _ => v,
        }
    }

    /// Interface DOFs of `side` in interface order.
    pub fn interface_dofs(&self, side: Side) -> Vec<usize> {
        self.interface_nodes.iter().map(|&v| self.dof(v, side)).collect()
    }

    /// Two-sided DOFs of triangle `t`.
    pub fn triangle_dofs(&self, t: usize) -> [usize; 3] {
        let side = self.triangle_side(t);
        self.triangles[t].map(|v| self.dof(v, side))
    }

    /// Vertex of a two-sided DOF.
    pub fn vertex_of(&self, dof: usize) -> usize {
        if dof < self.n_vertices {
            dof
        } else {
            self.interface_nodes[dof - self.n_vertices]
        }
    }

    /// DOFs touched by triangles of `side`, excluding interface and box DOFs.
    pub fn interior_dofs(&self, side: Side) -> Vec<usize> {
        let mut seen = vec![false; self.n_vertices];
        for t in 0..self.triangles.len() {
            if self.triangle_side(t) == side {
                for v in self.triangles[t] {
                    seen[v] = true;
                }
            }
        }
        (0..self.n_vertices)
            .filter(|&v| seen[v] && self.interface_slot[v].is_none() && !self.box_vertex[v])
            .collect()
    }

    /// Free DOFs of the identified view (all vertices off the box).
    pub fn free_identified(&self) -> Vec<usize> {
        (0..self.n_vertices).filter(|&v| !self.box_vertex[v]).collect()
    }

    /// Two-sided vector from per-vertex values (no jump across the interface).
    pub fn continuous(&self, vertex_values: &[f64]) -> Vec<f64> {
        assert_eq!(vertex_values.len(), self.n_vertices);
        let mut u = vertex_values.to_vec();
        u.extend(self.interface_nodes.iter().map(|&v| vertex_values[v]));
        u
    }

    /// Per-vertex values seen from `side`; vertices not on that side read
    /// their only DOF.
    pub fn vertex_values(&self, u: &[f64], side: Side) -> Vec<f64> {
        (0..self.n_vertices).map(|v| u[self.dof(v, side)]).collect()
    }

    /// Sums the two interface copies back onto the identified DOFs
    /// (the transpose of [`TwoSidedDofMap::continuous`]).
    pub fn restrict_sum(&self, y: &[f64]) -> Vec<f64> {
        let mut r = y[..self.n_vertices].to_vec();
        for (i, &v) in self.interface_nodes.iter().enumerate() {
            r[v] += y[self.n_vertices + i];
        }
        r
    }

    pub fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() == self.num_dofs() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.num_dofs(),
                got: u.len(),
            })
        }
    }
}

#[allow(dead_code)]
pub(crate) fn interface_edge_set(map: &TwoSidedDofMap) -> std::collections::HashSet<(usize, usize)> {
    let n = map.interface_nodes.len();
    (0..n)
        .map(|i| edge_key(map.interface_nodes[i], map.interface_nodes[(i + 1) % n]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::trimesh::tests::tiny_mesh;

    #[test]
    fn counts_and_views() {
        let m = tiny_mesh().refine_uniform();
        let map = build_dof_map(&m).unwrap();
        assert_eq!(map.num_interface(), 8);
        assert_eq!(map.num_dofs(), m.num_vertices() + 8);
        assert_eq!(map.num_identified(), m.num_vertices());
        let set = interface_edge_set(&map);
        for &[a, b] in m.interface_edges() {
            assert!(set.contains(&edge_key(a, b)));
        }
    }

    #[test]
    fn ordering_is_anchored_and_counterclockwise() {
        let m = tiny_mesh();
        let map = build_dof_map(&m).unwrap();
        // anchor (-1,-1) is vertex 0, then counterclockwise
        assert_eq!(map.interface_nodes(), &[0, 1, 2, 3]);
        let again = build_dof_map(&m).unwrap();
        assert_eq!(map.interface_nodes(), again.interface_nodes());
    }

    #[test]
    fn continuous_field_round_trip() {
        let m = tiny_mesh();
        let map = build_dof_map(&m).unwrap();
        let vals: Vec<f64> = (0..m.num_vertices()).map(|v| v as f64).collect();
        let u = map.continuous(&vals);
        assert_eq!(map.vertex_values(&u, Side::Outer), vals);
        assert_eq!(map.vertex_values(&u, Side::Inner), vals);
        let r = map.restrict_sum(&u);
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], 2.0);
        assert_eq!(r[5], 5.0);
    }
}
