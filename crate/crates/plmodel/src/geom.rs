//! Small geometry kit used by the scene model and the ray tracer:
//! 2-D/3-D points, polygon predicates, and segment intersection tests.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product of `self` and `o`.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn scale(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Point3) -> f64 {
        self.sub(o).norm()
    }

    pub fn normalized(self) -> Point3 {
        let n = self.norm();
        self.scale(1.0 / n)
    }

    /// Linear interpolation: `self + t * (o - self)`.
    pub fn lerp(self, o: Point3, t: f64) -> Point3 {
        self.add(o.sub(self).scale(t))
    }
}

/// Axis-aligned rectangle, used for scene bounds and footprint boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn of_points(pts: &[Point2]) -> Rect {
        let mut r = Rect {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in pts {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
        r
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.min_x >= self.min_x && o.max_x <= self.max_x && o.min_y >= self.min_y && o.max_y <= self.max_y
    }

    pub fn overlaps(&self, o: &Rect) -> bool {
        self.min_x <= o.max_x && o.min_x <= self.max_x && self.min_y <= o.max_y && o.min_y <= self.max_y
    }

    pub fn expand(&self, m: f64) -> Rect {
        Rect {
            min_x: self.min_x - m,
            min_y: self.min_y - m,
            max_x: self.max_x + m,
            max_y: self.max_y + m,
        }
    }
}

/// Twice the signed area of a polygon (positive for counter-clockwise).
pub fn signed_area_2x(poly: &[Point2]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a.cross(b);
    }
    s
}

/// Point-in-polygon by ray casting. Points on the boundary count as inside,
/// which is the convention the blocking tests need.
pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    // Boundary check first: distance from p to each edge.
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if point_on_segment(p, a, b, 1e-9) {
            return true;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            let x = a.x + t * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// True when `p` lies on segment `ab` within `tol` (perpendicular distance
/// and parameter range both respected).
pub fn point_on_segment(p: Point2, a: Point2, b: Point2, tol: f64) -> bool {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a) <= tol;
    }
    let t = p.sub(a).dot(ab) / len2;
    if !(-1e-12..=1.0 + 1e-12).contains(&t) {
        return false;
    }
    let proj = Point2::new(a.x + t * ab.x, a.y + t * ab.y);
    p.dist(proj) <= tol
}

/// Intersection of segments `a0a1` and `b0b1` as parameters `(t, u)` along
/// each segment, including endpoint touches. Collinear overlaps report the
/// touch at `a0` or `a1` when one exists.
pub fn segment_intersection(
    a0: Point2,
    a1: Point2,
    b0: Point2,
    b1: Point2,
) -> Option<(f64, f64)> {
    let r = a1.sub(a0);
    let s = b1.sub(b0);
    let denom = r.cross(s);
    let qp = b0.sub(a0);
    const EPS: f64 = 1e-12;
    if denom.abs() > EPS * (r.norm() * s.norm()).max(1e-30) {
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        if (-1e-9..=1.0 + 1e-9).contains(&t) && (-1e-9..=1.0 + 1e-9).contains(&u) {
            return Some((t.clamp(0.0, 1.0), u.clamp(0.0, 1.0)));
        }
        return None;
    }
    // Parallel. Check collinearity, then overlap of parameter ranges.
    if qp.cross(r).abs() > 1e-9 * r.norm().max(1.0) {
        return None;
    }
    let rr = r.dot(r);
    if rr == 0.0 {
        return None;
    }
    let t0 = b0.sub(a0).dot(r) / rr;
    let t1 = b1.sub(a0).dot(r) / rr;
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    if hi < -1e-9 || lo > 1.0 + 1e-9 {
        return None;
    }
    let t = lo.clamp(0.0, 1.0);
    Some((t, 0.0))
}

/// True when the polygon has no self-intersections (edges may share only
/// their common endpoints with adjacent edges).
pub fn polygon_is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a0 = poly[i];
        let a1 = poly[(i + 1) % n];
        if a0.dist(a1) < 1e-9 {
            return false; // degenerate edge
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let b0 = poly[j];
            let b1 = poly[(j + 1) % n];
            if segment_intersection(a0, a1, b0, b1).is_some() {
                return false;
            }
        }
    }
    true
}

/// Overlap test for two convex polygons via the separating-axis theorem.
/// Touching boundaries do not count as overlap.
pub fn convex_polygons_overlap(a: &[Point2], b: &[Point2]) -> bool {
    for (p, q) in [(a, b), (b, a)] {
        let n = p.len();
        for i in 0..n {
            let e = p[(i + 1) % n].sub(p[i]);
            let axis = Point2::new(-e.y, e.x);
            let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in p {
                let d = v.dot(axis);
                pmin = pmin.min(d);
                pmax = pmax.max(d);
            }
            let (mut qmin, mut qmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in q {
                let d = v.dot(axis);
                qmin = qmin.min(d);
                qmax = qmax.max(d);
            }
            if pmax <= qmin + 1e-12 || qmax <= pmin + 1e-12 {
                return false;
            }
        }
    }
    true
}
