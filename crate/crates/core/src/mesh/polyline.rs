use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// A closed, simple, counterclockwise polygonal curve.
///
/// The closing segment from the last point back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
}

/// Interface generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum InterfaceShape {
    /// Regular `segments`-gon inscribed in the circle of the given radius.
    Circle { radius: f64, segments: usize },
    /// Axis-aligned square centered at the origin.
    Square { side: f64 },
    /// Koch snowflake prefractal built on an equilateral triangle.
    Koch { level: u32, side: f64 },
}

impl std::fmt::Display for InterfaceShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InterfaceShape::Circle { radius, segments } => write!(f, "circle({radius}, {segments})"),
            InterfaceShape::Square { side } => write!(f, "square({side})"),
            InterfaceShape::Koch { level, side } => write!(f, "koch({level}, {side})"),
        }
    }
}

/// Parses `circle(R, m)`, `square(L)` and `koch(level, side)`; the side of
/// a Koch curve defaults to 1.
impl std::str::FromStr for InterfaceShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse shape {s:?}; expected circle(R, m), square(L) or koch(level, side)"));
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let body = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<&str> = body.split(',').map(str::trim).collect();
        let num = |i: usize| args.get(i).and_then(|a| a.parse::<f64>().ok()).ok_or_else(bad);
        let int = |i: usize| args.get(i).and_then(|a| a.parse::<u32>().ok()).ok_or_else(bad);
        match (s[..open].trim(), args.len()) {
            ("circle", 2) => Ok(InterfaceShape::Circle { radius: num(0)?, segments: int(1)? as usize }),
            ("square", 1) => Ok(InterfaceShape::Square { side: num(0)? }),
            ("koch", 1) => Ok(InterfaceShape::Koch { level: int(0)?, side: 1.0 }),
            ("koch", 2) => Ok(InterfaceShape::Koch { level: int(0)?, side: num(1)? }),
            _ => Err(bad()),
        }
    }
}

pub fn make_interface(shape: &InterfaceShape) -> Result<Polyline> {
    match *shape {
        InterfaceShape::Circle { radius, segments } => {
            if segments < 3 {
                return Err(Error::invalid(format!(
                    "circle needs at least 3 segments, got {segments}"
                )));
            }
            positive("radius", radius)?;
            let points = (0..segments)
                .map(|j| {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
                    [radius * t.cos(), radius * t.sin()]
                })
                .collect();
            Polyline::new(points)
        }
        InterfaceShape::Square { side } => {
            positive("side", side)?;
            let a = 0.5 * side;
            Polyline::new(vec![[-a, -a], [a, -a], [a, a], [-a, a]])
        }
        InterfaceShape::Koch { level, side } => {
            positive("side", side)?;
            if level > 7 {
                return Err(Error::invalid(format!("koch level {level} exceeds 7")));
            }
            Polyline::new(koch_points(level, side))
        }
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {value}")))
    }
}

fn koch_points(level: u32, side: f64) -> Vec<Point> {
    let height = side * 3f64.sqrt() / 2.0;
    // centroid at the origin
    let mut pts = vec![
        [-side / 2.0, -height / 3.0],
        [side / 2.0, -height / 3.0],
        [0.0, 2.0 * height / 3.0],
    ];
    let (s, c) = (-std::f64::consts::FRAC_PI_3).sin_cos();
    for _ in 0..level {
        let n = pts.len();
        let mut next = Vec::with_capacity(4 * n);
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            let d = [(b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0];
            let p1 = [a[0] + d[0], a[1] + d[1]];
            let p2 = [a[0] + 2.0 * d[0], a[1] + 2.0 * d[1]];
            // outward bump: clockwise rotation of the segment direction
            let peak = [p1[0] + c * d[0] - s * d[1], p1[1] + s * d[0] + c * d[1]];
            next.extend_from_slice(&[a, p1, peak, p2]);
        }
        pts = next;
    }
    pts
}

impl Polyline {
    /// Validates and wraps a closed point list.
    ///
    /// Rejects fewer than three points, repeated consecutive points,
    /// self-intersections and clockwise orientation.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        if n < 3 {
            return Err(Error::Geometry(format!("polyline needs >= 3 points, got {n}")));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Geometry("non-finite coordinate".into()));
        }
        for i in 0..n {
            if points[i] == points[(i + 1) % n] {
                return Err(Error::Geometry(format!("repeated consecutive point at index {i}")));
            }
        }
        let line = Polyline { points };
        if let Some((i, j)) = line.find_self_intersection() {
            return Err(Error::Geometry(format!(
                "polyline is not simple: segments {i} and {j} intersect"
            )));
        }
        let area = line.signed_area();
        if area <= 0.0 {
            return Err(Error::Geometry(format!(
                "polyline must be counterclockwise (signed area {area:.3e})"
            )));
        }
        Ok(line)
    }

    /// Like [`Polyline::new`], but reverses clockwise input.
    pub fn new_oriented(mut points: Vec<Point>) -> Result<Self> {
        if shoelace(&points) < 0.0 {
            points.reverse();
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn num_segments(&self) -> usize {
        self.points.len()
    }

    pub fn segment(&self, i: usize) -> (Point, Point) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        (0..self.points.len()).map(move |i| self.segment(i))
    }

    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).sum()
    }

    pub fn signed_area(&self) -> f64 {
        shoelace(&self.points)
    }

    pub fn shortest_segment(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max(dist(*a, *b));
            }
        }
        d
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Even-odd point-in-polygon test. Points on the curve are unspecified.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        self.segments()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polyline {
        Polyline {
            points: self.points.iter().map(|p| [p[0] + dx, p[1] + dy]).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Polyline> {
        positive("scale factor", factor)?;
        Ok(Polyline {
            points: self.points.iter().map(|p| [p[0] * factor, p[1] * factor]).collect(),
        })
    }

    /// True if the two curves share no point.
    pub fn disjoint_from(&self, other: &Polyline) -> bool {
        self.segments()
            .all(|(a, b)| other.segments().all(|(c, d)| !segments_intersect(a, b, c, d)))
    }

    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.points.len();
        for i in 0..n {
            let (a, b) = self.segment(i);
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (c, d) = self.segment(j);
                if adjacent {
                    // neighbours share one endpoint; they may only overlap if collinear and folding back
                    let shared = if j == i + 1 { b } else { a };
                    let (p, q) = if j == i + 1 { (a, d) } else { (b, c) };
                    if orient(p, shared, q) == 0.0 && dot(sub(p, shared), sub(q, shared)) > 0.0 {
                        return Some((i, j));
                    }
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

fn shoelace(points: &[Point]) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(c, a, b))
        || (o2 == 0.0 && on_segment(d, a, b))
        || (o3 == 0.0 && on_segment(a, c, d))
        || (o4 == 0.0 && on_segment(b, c, d))
}
