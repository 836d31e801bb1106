use std::collections::BTreeMap;

use super::sparse::SparseSymMatrix;
use crate::error::{Error, Result};
use crate::mesh::{Point, Region, TriMesh, TwoSidedDofMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Stiffness,
    Mass,
}

/// Which DOF numbering to assemble into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    /// Duplicated interface DOFs; outer triangles use the outer copies.
    TwoSided,
    /// One DOF per vertex (the continuous space).
    Identified,
}

/// Per-region coefficients; regions without an entry are not assembled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionCoeffs(BTreeMap<Region, f64>);

impl RegionCoeffs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, region: Region, c: f64) -> Self {
        self.0.insert(region, c);
        self
    }

    /// Coefficient `c` on every region of `mesh` selected by `pred`.
    pub fn uniform(mesh: &TriMesh, c: f64, pred: impl Fn(Region) -> bool) -> Self {
        RegionCoeffs(mesh.regions().into_iter().filter(|&r| pred(r)).map(|r| (r, c)).collect())
    }

    pub fn get(&self, r: Region) -> Option<f64> {
        self.0.get(&r).copied()
    }
}

/// `∫ ∇φ_i·∇φ_j` on one triangle.
pub fn local_stiffness(p: [Point; 3]) -> [[f64; 3]; 3] {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    // rotated opposite edges are area2 * gradients
    let g: [[f64; 2]; 3] = std::array::from_fn(|i| {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        [a[1] - b[1], b[0] - a[0]]
    });
    std::array::from_fn(|i| std::array::from_fn(|j| (g[i][0] * g[j][0] + g[i][1] * g[j][1]) / (2.0 * area2)))
}

/// `∫ φ_i φ_j` on one triangle.
pub fn local_mass(p: [Point; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    std::array::from_fn(|i| std::array::from_fn(|j| area / 12.0 * if i == j { 2.0 } else { 1.0 }))
}

/// Galerkin matrix of `form`, weighted by `coeffs`, over the triangles whose
/// region has a coefficient. Rows and columns of DOFs not touched by those
/// triangles are empty.
pub fn assemble(
    mesh: &TriMesh,
    dofs: &TwoSidedDofMap,
    form: Form,
    coeffs: &RegionCoeffs,
    view: View,
) -> Result<SparseSymMatrix> {
    let present = mesh.regions();
    for (&r, &c) in &coeffs.0 {
        if !present.contains(&r) {
            return Err(Error::UnknownRegion(r.code()));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("coefficient {c} on {r:?} must be positive")));
        }
    }
    let dim = match view {
        View::TwoSided => dofs.num_dofs(),
        View::Identified => dofs.num_identified(),
    };
    let mut entries = Vec::with_capacity(9 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let Some(c) = coeffs.get(mesh.tags()[t]) else { continue };
        let p = mesh.triangle_points(t);
        let local = match form {
            Form::Stiffness => local_stiffness(p),
            Form::Mass => local_mass(p),
        };
        let idx = match view {
            View::TwoSided => dofs.triangle_dofs(t),
            View::Identified => mesh.triangles()[t],
        };
        for i in 0..3 {
            for j in 0..3 {
                entries.push((idx[i], idx[j], c * local[i][j]));
            }
        }
    }
    Ok(SparseSymMatrix::from_triplets(dim, entries))
}
