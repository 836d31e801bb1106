//! Deterministic SVG output for meshes and P1 fields.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::mesh::{orient, Point, TriMesh, TwoSidedDofMap};

const SIZE: f64 = 800.0;

/// Viridis-like map sampled at 256 points.
pub fn colormap() -> [[u8; 3]; 256] {
    const C: [[f64; 3]; 7] = [
        [0.2777273272234177, 0.005407344544966578, 0.3340998053353061],
        [0.1050930431085774, 1.404613529898575, 1.384590162594685],
        [-0.3308618287255563, 0.214847559468213, 0.09509516302823659],
        [-4.634230498983486, -5.799100973351585, -19.33244095627987],
        [6.228269936347081, 14.17993336680509, 56.69055260068105],
        [4.776384997670288, -13.74514537774601, -65.35303263337234],
        [-5.435455855934631, 4.645852612178535, 26.3124352495832],
    ];
    let mut map = [[0u8; 3]; 256];
    for (i, entry) in map.iter_mut().enumerate() {
        let t = i as f64 / 255.0;
        for c in 0..3 {
            let v = C.iter().rev().fold(0.0, |acc, row| acc * t + row[c]);
            entry[c] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    map
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

struct Canvas {
    scale: f64,
    b: f64,
    out: String,
}

impl Canvas {
    fn new(mesh: &TriMesh) -> Self {
        let b = mesh.box_half_width();
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(out, "<style>.mesh{{fill:none;stroke:#9a9a9a;stroke-width:0.3}} .interface{{stroke:#d62728;stroke-width:1.5}}</style>");
        Canvas { scale: SIZE / (2.0 * b), b, out }
    }

    fn xy(&self, p: Point) -> (f64, f64) {
        ((p[0] + self.b) * self.scale, (self.b - p[1]) * self.scale)
    }

    fn polygon(&mut self, p: [Point; 3], attrs: &str) {
        let pts: Vec<String> = p
            .iter()
            .map(|&q| {
                let (x, y) = self.xy(q);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(self.out, r#"<polygon points="{}" {attrs}/>"#, pts.join(" "));
    }

    fn interface(&mut self, mesh: &TriMesh) {
        for [a, q] in interface_segments(mesh) {
            let ((x1, y1), (x2, y2)) = (self.xy(a), self.xy(q));
            let _ = writeln!(self.out, r#"<line class="interface" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#);
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Interface edges chained into closed curves, with collinear neighbours
/// merged, so that each straight piece of the curve is one segment.
pub fn interface_segments(mesh: &TriMesh) -> Vec<[Point; 2]> {
    let next: HashMap<usize, usize> = mesh.interface_edges().iter().map(|&[a, b]| (a, b)).collect();
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let v = mesh.vertices();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for s in starts {
        if seen.contains(&s) {
            continue;
        }
        let mut cycle = vec![s];
        seen.insert(s);
        let mut cur = s;
        while let Some(&n) = next.get(&cur) {
            if n == s || !seen.insert(n) {
                break;
            }
            cycle.push(n);
            cur = n;
        }
        let m = cycle.len();
        let corner = |i: usize| {
            let (p, c, q) = (v[cycle[(i + m - 1) % m]], v[cycle[i]], v[cycle[(i + 1) % m]]);
            let scale = ((c[0] - p[0]).hypot(c[1] - p[1])) * ((q[0] - c[0]).hypot(q[1] - c[1]));
            orient(p, c, q).abs() > 1e-9 * scale
        };
        let corners: Vec<usize> = (0..m).filter(|&i| corner(i)).collect();
        if corners.is_empty() {
            continue;
        }
        for (j, &i) in corners.iter().enumerate() {
            let k = corners[(j + 1) % corners.len()];
            out.push([v[cycle[i]], v[cycle[k]]]);
        }
    }
    out
}

/// Mesh edges with the interface drawn on top.
pub fn mesh_svg(mesh: &TriMesh) -> String {
    let mut c = Canvas::new(mesh);
    for t in 0..mesh.num_triangles() {
        c.polygon(mesh.triangle_points(t), r#"class="mesh""#);
    }
    c.interface(mesh);
    c.finish()
}

/// P1 field colored linearly within each triangle, using the DOFs of the
/// side each triangle belongs to.
pub fn field_svg(mesh: &TriMesh, dofs: &TwoSidedDofMap, u: &[f64]) -> Result<String> {
    dofs.check_len(u)?;
    let map = colormap();
    let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let level = |x: f64| ((x - lo) / span).clamp(0.0, 1.0) * 255.0;
    let mut c = Canvas::new(mesh);
    let mut defs = String::new();
    let mut body = String::new();
    std::mem::swap(&mut body, &mut c.out);
    for t in 0..mesh.num_triangles() {
        let p = mesh.triangle_points(t);
        let d = dofs.triangle_dofs(t);
        let val = [u[d[0]], u[d[1]], u[d[2]]];
        let (imin, imax) = (argmin(&val), argmax(&val));
        let (l0, l1) = (level(val[imin]), level(val[imax]));
        if l1.round() == l0.round() {
            c.polygon(p, &format!(r#"fill="{}" stroke="none""#, hex(map[l0.round() as usize])));
            continue;
        }
        // the field is affine: color varies along its gradient only
        let area2 = orient(p[0], p[1], p[2]);
        let gx = (val[0] * (p[1][1] - p[2][1]) + val[1] * (p[2][1] - p[0][1]) + val[2] * (p[0][1] - p[1][1])) / area2;
        let gy = (val[0] * (p[2][0] - p[1][0]) + val[1] * (p[0][0] - p[2][0]) + val[2] * (p[1][0] - p[0][0])) / area2;
        let g2 = gx * gx + gy * gy;
        let a = p[imin];
        let s = (val[imax] - val[imin]) / g2;
        let bpt = [a[0] + s * gx, a[1] + s * gy];
        let ((x1, y1), (x2, y2)) = (c.xy(a), c.xy(bpt));
        let _ = writeln!(
            defs,
            r#"<linearGradient id="g{t}" gradientUnits="userSpaceOnUse" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}">"#
        );
        let first = l0.round() as usize;
        let last = l1.round() as usize;
        for i in first..=last {
            let off = ((i as f64 - l0) / (l1 - l0)).clamp(0.0, 1.0);
            let _ = writeln!(defs, r#"<stop offset="{off:.4}" stop-color="{}"/>"#, hex(map[i]));
        }
        defs.push_str("</linearGradient>\n");
        c.polygon(p, &format!(r#"fill="url(#g{t})" stroke="none""#));
    }
    let polys = std::mem::take(&mut c.out);
    c.out = body;
    if !defs.is_empty() {
        let _ = write!(c.out, "<defs>\n{defs}</defs>\n");
    }
    c.out.push_str(&polys);
    c.interface(mesh);
    Ok(c.finish())
}

fn argmin(v: &[f64; 3]) -> usize {
    (0..3).fold(0, |m, i| if v[i] < v[m] { i } else { m })
}

fn argmax(v: &[f64; 3]) -> usize {
    (0..3).fold(0, |m, i| if v[i] > v[m] { i } else { m })
}

pub fn write_svg(svg: &str, path: &Path) -> Result<()> {
    std::fs::write(path, svg)?;
    Ok(())
}
