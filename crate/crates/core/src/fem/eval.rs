use crate::error::{Error, Result};
use crate::mesh::{orient, Point, Side, TriMesh, TwoSidedDofMap};

/// Triangle strictly containing `p` together with its barycentric
/// coordinates. Points on an edge are reported as not strictly contained.
pub fn locate(mesh: &TriMesh, p: Point) -> Option<(usize, [f64; 3])> {
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.triangle_points(t);
        let area = orient(a, b, c);
        let l = [orient(p, b, c) / area, orient(a, p, c) / area, orient(a, b, p) / area];
        if l.iter().all(|&x| x > 1e-12) {
            return Some((t, l));
        }
    }
    None
}

/// P1 interpolation of `u` at each point, reading the DOFs of `side`.
///
/// Each point must lie strictly inside a triangle of that side; on the
/// interface the field is two-valued and the call fails.
pub fn eval_field(
    mesh: &TriMesh,
    dofs: &TwoSidedDofMap,
    u: &[f64],
    points: &[Point],
    side: Side,
) -> Result<Vec<f64>> {
    dofs.check_len(u)?;
    points
        .iter()
        .map(|&p| {
            let (t, l) = locate(mesh, p).ok_or(Error::PointLocation { x: p[0], y: p[1], side: side.name() })?;
            if dofs.triangle_side(t) != side {
                return Err(Error::PointLocation { x: p[0], y: p[1], side: side.name() });
            }
            let d = dofs.triangle_dofs(t);
            Ok(l[0] * u[d[0]] + l[1] * u[d[1]] + l[2] * u[d[2]])
        })
        .collect()
}
