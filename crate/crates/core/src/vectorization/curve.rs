//! Typed curve segments and their flattening into polylines.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geom::{point_segment_distance, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveKind {
    Line,
    QuadraticBezier,
    CubicBezier,
    CircularArc,
    EllipticalArc,
}

impl CurveKind {
    /// Number of control points that define a curve of this kind.
    pub const fn control_point_count(self) -> usize {
        match self {
            CurveKind::Line => 2,
            CurveKind::QuadraticBezier => 3,
            CurveKind::CubicBezier => 4,
            CurveKind::CircularArc | CurveKind::EllipticalArc => 3,
        }
    }
}

/// One piece of a closed region outline.
///
/// Arcs are stored as `(start, point on the arc, end)`. An elliptical arc
/// additionally records the ellipse's `axis_ratio` (minor/major extent
/// along its own axes) and the `rotation` of its major axis in degrees;
/// the ellipse is the one through the three points with that shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSegment {
    Line { points: [Point; 2] },
    QuadraticBezier { points: [Point; 3] },
    CubicBezier { points: [Point; 4] },
    CircularArc { points: [Point; 3] },
    EllipticalArc { points: [Point; 3], axis_ratio: f64, rotation: f64 },
}

impl CurveSegment {
    pub fn line(a: Point, b: Point) -> Self {
        CurveSegment::Line { points: [a, b] }
    }

    pub fn kind(&self) -> CurveKind {
        match self {
            CurveSegment::Line { .. } => CurveKind::Line,
            CurveSegment::QuadraticBezier { .. } => CurveKind::QuadraticBezier,
            CurveSegment::CubicBezier { .. } => CurveKind::CubicBezier,
            CurveSegment::CircularArc { .. } => CurveKind::CircularArc,
            CurveSegment::EllipticalArc { .. } => CurveKind::EllipticalArc,
        }
    }

    pub fn control_points(&self) -> &[Point] {
        match self {
            CurveSegment::Line { points } => points,
            CurveSegment::QuadraticBezier { points } => points,
            CurveSegment::CubicBezier { points } => points,
            CurveSegment::CircularArc { points } => points,
            CurveSegment::EllipticalArc { points, .. } => points,
        }
    }

    pub fn start(&self) -> Point {
        self.control_points()[0]
    }

    pub fn end(&self) -> Point {
        *self.control_points().last().expect("curves have at least two points")
    }

    /// Appends the flattened curve to `out`, excluding its start point.
    /// Every emitted chord stays within `tol` of the true curve.
    pub fn flatten_into(&self, tol: f64, out: &mut Vec<Point>) {
        let tol = tol.max(1e-6);
        match self {
            CurveSegment::Line { points } => out.push(points[1]),
            CurveSegment::QuadraticBezier { points: [p0, p1, p2] } => {
                // Exact degree elevation keeps one subdivision routine.
                let c1 = *p0 + (*p1 - *p0) * (2.0 / 3.0);
                let c2 = *p2 + (*p1 - *p2) * (2.0 / 3.0);
                flatten_cubic([*p0, c1, c2, *p2], tol, 0, out);
            }
            CurveSegment::CubicBezier { points } => flatten_cubic(*points, tol, 0, out),
            CurveSegment::CircularArc { points } => flatten_arc(*points, 1.0, 0.0, tol, out),
            CurveSegment::EllipticalArc { points, axis_ratio, rotation } => {
                flatten_arc(*points, *axis_ratio, *rotation, tol, out)
            }
        }
    }
}

pub fn cubic_point(p: &[Point; 4], t: f64) -> Point {
    let mt = 1.0 - t;
    p[0] * (mt * mt * mt) + p[1] * (3.0 * mt * mt * t) + p[2] * (3.0 * mt * t * t) + p[3] * (t * t * t)
}

pub fn quadratic_point(p: &[Point; 3], t: f64) -> Point {
    let mt = 1.0 - t;
    p[0] * (mt * mt) + p[1] * (2.0 * mt * t) + p[2] * (t * t)
}

fn split_cubic(p: [Point; 4], t: f64) -> ([Point; 4], [Point; 4]) {
    let ab = p[0].lerp(p[1], t);
    let bc = p[1].lerp(p[2], t);
    let cd = p[2].lerp(p[3], t);
    let abc = ab.lerp(bc, t);
    let bcd = bc.lerp(cd, t);
    let mid = abc.lerp(bcd, t);
    ([p[0], ab, abc, mid], [mid, bcd, cd, p[3]])
}

fn flatten_cubic(p: [Point; 4], tol: f64, depth: u32, out: &mut Vec<Point>) {
    // The curve lies in the hull of its control points, so the control
    // points' distance to the chord bounds the chord's deviation.
    let flat = point_segment_distance(p[1], p[0], p[3]).max(point_segment_distance(p[2], p[0], p[3]));
    if flat <= tol || depth >= 24 {
        out.push(p[3]);
        return;
    }
    let (a, b) = split_cubic(p, 0.5);
    flatten_cubic(a, tol, depth + 1, out);
    flatten_cubic(b, tol, depth + 1, out);
}

/// Circle through three points, `None` when they are collinear.
pub(crate) fn circumcircle(a: Point, b: Point, c: Point) -> Option<(Point, f64)> {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    let scale = (a - b).norm().max((b - c).norm()).max((a - c).norm());
    if d.abs() <= 1e-12 * scale * scale {
        return None;
    }
    let a2 = a.dot(a);
    let b2 = b.dot(b);
    let c2 = c.dot(c);
    let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    let center = Point::new(ux, uy);
    Some((center, center.distance(a)))
}

/// Start angle and signed sweep of the arc from `a` through `m` to `b`.
pub(crate) fn arc_sweep(center: Point, a: Point, m: Point, b: Point) -> (f64, f64) {
    let ang = |p: Point| (p.y - center.y).atan2(p.x - center.x);
    let a0 = ang(a);
    let ccw = |x: f64| (x - a0).rem_euclid(TAU);
    let to_end = ccw(ang(b));
    let to_mid = ccw(ang(m));
    let sweep = if to_mid <= to_end { to_end } else { to_end - TAU };
    (a0, sweep)
}

fn flatten_arc(points: [Point; 3], axis_ratio: f64, rotation: f64, tol: f64, out: &mut Vec<Point>) {
    let ratio = if axis_ratio.is_finite() && axis_ratio > 0.0 { axis_ratio } else { 1.0 };
    let to_circle = |p: Point| {
        let r = p.rotated(-rotation);
        Point::new(r.x, r.y / ratio)
    };
    let from_circle = |p: Point| Point::new(p.x, p.y * ratio).rotated(rotation);
    let [a, m, b] = points.map(to_circle);
    let Some((center, radius)) = circumcircle(a, m, b) else {
        out.push(points[1]);
        out.push(points[2]);
        return;
    };
    let local_tol = tol / ratio.max(1.0);
    let step = if local_tol >= radius { PI / 2.0 } else { 2.0 * (1.0 - local_tol / radius).acos() };
    let (a0, sweep) = arc_sweep(center, a, m, b);
    let n = ((sweep.abs() / step.max(1e-6)).ceil() as usize).max(1);
    for i in 1..n {
        let t = a0 + sweep * i as f64 / n as f64;
        out.push(from_circle(center + Point::new(t.cos(), t.sin()) * radius));
    }
    out.push(points[2]);
}

/// Flattens a closed chain of curves into a ring (no repeated end point).
pub fn flatten_path(path: &[CurveSegment], tol: f64) -> Vec<Point> {
    let Some(first) = path.first() else {
        return Vec::new();
    };
    let mut out = vec![first.start()];
    for c in path {
        c.flatten_into(tol, &mut out);
    }
    if out.len() > 1 && out.last().unwrap().distance(out[0]) <= 1e-9 {
        out.pop();
    }
    out
}
