//! Planar primitives shared by every stage.
//!
//! Coordinates are image pixel coordinates: x grows to the right, y grows
//! downward, and pixel `(i, j)` covers the unit square `[i, i+1) × [j, j+1)`.
//! Angles and orientations are measured with the usual mathematical
//! convention applied to these raw coordinates (`atan2(dy, dx)`, positive
//! shoelace area = counterclockwise).

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }

    /// Rotates about the origin by `degrees` (counterclockwise in the
    /// mathematical sense of the raw coordinates).
    pub fn rotated(self, degrees: f64) -> Point {
        let (s, c) = degrees.to_radians().sin_cos();
        Point::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    pub fn rotated_about(self, center: Point, degrees: f64) -> Point {
        (self - center).rotated(degrees) + center
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point::new(x, y)
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Integer pixel rectangle, inclusive of `x0, y0` and exclusive of `x1, y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        };
        (b.x0 < b.x1 && b.y0 < b.y1).then_some(b)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }
}

/// Signed shoelace area of a closed ring (positive when counterclockwise).
pub fn signed_area(ring: &[Point]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        acc += a.cross(b);
    }
    acc * 0.5
}

/// First moments of a closed ring: `(signed area, Σ x-moment, Σ y-moment)`.
/// The centroid of a ring is `(mx / (6A), my / (6A))`.
pub(crate) fn ring_moments(ring: &[Point]) -> (f64, f64, f64) {
    let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
    for i in 0..ring.len() {
        let p = ring[i];
        let q = ring[(i + 1) % ring.len()];
        let c = p.cross(q);
        a += c;
        mx += (p.x + q.x) * c;
        my += (p.y + q.y) * c;
    }
    (a * 0.5, mx, my)
}

/// A polygon given by its exterior ring and optional hole rings. Rings are
/// implicitly closed (the first vertex is not repeated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holes: Vec<Vec<Point>>,
}

impl Polygon {
    /// Requires at least three vertices and a nonzero area.
    pub fn new(exterior: Vec<Point>) -> Result<Self> {
        Self::with_holes(exterior, Vec::new())
    }

    pub fn with_holes(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        if exterior.len() < 3 || signed_area(&exterior) == 0.0 {
            return Err(Error::DegeneratePolygon);
        }
        Ok(Self { exterior, holes })
    }

    /// Exterior area minus hole areas, independent of ring orientation.
    pub fn area(&self) -> f64 {
        signed_area(&self.exterior).abs() - self.holes.iter().map(|h| signed_area(h).abs()).sum::<f64>()
    }

    /// Area-weighted centroid from the shoelace first moments.
    pub fn centroid(&self) -> Result<Point> {
        let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
        let mut add = |ring: &[Point], sign: f64| {
            let (ra, rx, ry) = ring_moments(ring);
            let s = sign * ra.signum();
            a += s * ra;
            mx += s * rx;
            my += s * ry;
        };
        add(&self.exterior, 1.0);
        for h in &self.holes {
            add(h, -1.0);
        }
        if a.abs() <= f64::EPSILON {
            return Err(Error::DegeneratePolygon);
        }
        Ok(Point::new(mx / (6.0 * a), my / (6.0 * a)))
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.exterior.iter().chain(self.holes.iter().flatten()).copied()
    }

    /// `(min, max)` corners of the axis-aligned bounds.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.exterior {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Convex hull by Andrew's monotone chain. Returns the hull counterclockwise
/// without collinear points; fewer than three points means the input is
/// degenerate.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.iter().copied().filter(|p| p.x.is_finite() && p.y.is_finite()).collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: Point, a: Point, b: Point| (a - o).cross(b - o);
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shoelace_orientation() {
        let ccw = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        assert_eq!(signed_area(&ccw), 1.0);
        let mut cw = ccw;
        cw.reverse();
        assert_eq!(signed_area(&cw), -1.0);
    }

    #[test]
    fn hull_drops_interior_and_collinear() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 2.0),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!(signed_area(&hull) > 0.0);
    }

    #[test]
    fn rotation_quarter_turn() {
        let p = Point::new(1.0, 0.0).rotated(90.0);
        assert!((p.x).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12);
    }
}
