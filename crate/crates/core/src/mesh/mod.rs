//! Interface curves, two-sided triangulations and DOF maps.

mod dofmap;
mod io;
mod polyline;
mod triangulate;
mod trimesh;

pub use dofmap::{build_dof_map, Side, TwoSidedDofMap};
pub use io::{mesh_to_string, parse_mesh, read_mesh, write_mesh};
pub use polyline::{dist, make_interface, InterfaceShape, Point, Polyline};
pub use triangulate::{triangulate_two_sided, MeshBuilder};
pub use trimesh::{Region, TriMesh};

pub(crate) use polyline::orient;

#[cfg(test)]
pub(crate) use trimesh::tests::tiny_mesh;
