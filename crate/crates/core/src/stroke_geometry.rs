//! Polygons → parametric rectangular strokes.
//!
//! Small polygons become one stroke, their minimum-area oriented bounding
//! rectangle. Large polygons are cut by an axis-aligned grid, the cells are
//! merged into area-balanced runs, and each run yields one stroke.
//!
//! Angles are measured from the +x axis towards +y in raw pixel coordinates.

use geo::{BooleanOps, Coord, LineString, MultiPolygon};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{convex_hull, Point, Polygon};

/// Relative tolerance under which two rectangle sides count as equal.
const SQUARE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeParams {
    /// Rectangle centre.
    pub x: f64,
    pub y: f64,
    /// Long side.
    pub w: f64,
    pub h: f64,
    /// Direction of the long side in degrees, in `[0, 180)`.
    pub theta: f64,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl StrokeParams {
    pub fn from_rect(rect: RotatedRect, fill: [u8; 3]) -> Self {
        let [r, g, b] = fill;
        Self { x: rect.center.x, y: rect.center.y, w: rect.w, h: rect.h, theta: rect.theta, r, g, b }
    }

    pub fn rect(&self) -> RotatedRect {
        RotatedRect { center: Point::new(self.x, self.y), w: self.w, h: self.h, theta: self.theta }
    }

    pub fn color(&self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x, self.y, self.w, self.h, self.theta].iter().all(|v| v.is_finite());
        if !finite || !(self.h > 0.0) || self.w < self.h || !(0.0..180.0).contains(&self.theta) {
            return Err(Error::ProgramInvalid(format!(
                "stroke needs w >= h > 0 and theta in [0, 180): w={} h={} theta={}",
                self.w, self.h, self.theta
            )));
        }
        Ok(())
    }
}

/// Oriented rectangle in canonical form: `w >= h`, `theta` in `[0, 180)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    pub center: Point,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl RotatedRect {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Unit vectors along the long and short sides.
    pub fn axes(&self) -> (Point, Point) {
        let u = Point::new(1.0, 0.0).rotated(self.theta);
        (u, Point::new(-u.y, u.x))
    }

    pub fn corners(&self) -> [Point; 4] {
        let (u, v) = self.axes();
        let (a, b) = (u * (self.w / 2.0), v * (self.h / 2.0));
        let c = self.center;
        [c - a - b, c + a - b, c + a + b, c - a + b]
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let (u, v) = self.axes();
        let d = p - self.center;
        d.dot(u).abs() <= self.w / 2.0 + tol && d.dot(v).abs() <= self.h / 2.0 + tol
    }
}

/// Canonical angle of the long axis, in `[0, 180)`.
pub fn estimate_theta(rect: &RotatedRect) -> f64 {
    rect.theta
}

fn normalize_degrees(theta: f64, period: f64) -> f64 {
    let t = theta.rem_euclid(period);
    if t >= period - 1e-12 { 0.0 } else { t }
}

/// Minimum-area enclosing rectangle by rotating calipers over the convex
/// hull of all vertices (holes included, which never matter).
pub fn min_rotated_rect(poly: &Polygon) -> Result<RotatedRect> {
    let pts: Vec<Point> = poly.vertices().collect();
    min_rect_of_points(&pts)
}

pub fn min_rect_of_points(points: &[Point]) -> Result<RotatedRect> {
    let hull = convex_hull(points);
    let n = hull.len();
    if n < 3 {
        return Err(Error::DegeneratePolygon);
    }
    let edge_dir = |i: usize| (hull[(i + 1) % n] - hull[i]).normalized();
    let along = |j: usize, u: Point| hull[j % n].dot(u);
    let normal = |u: Point| Point::new(-u.y, u.x);

    let u0 = edge_dir(0);
    let argmax = |f: &dyn Fn(usize) -> f64| (0..n).max_by(|&a, &b| f(a).total_cmp(&f(b))).unwrap();
    let mut right = argmax(&|j| along(j, u0));
    let mut top = argmax(&|j| along(j, normal(u0)));
    let mut left = argmax(&|j| -along(j, u0));

    let mut best: Option<RotatedRect> = None;
    for i in 0..n {
        let u = edge_dir(i);
        let v = normal(u);
        for (ptr, f) in [
            (&mut right, &(|j: usize| along(j, u)) as &dyn Fn(usize) -> f64),
            (&mut top, &|j: usize| along(j, v)),
            (&mut left, &|j: usize| -along(j, u)),
        ] {
            let mut steps = 0;
            while steps < n && f(*ptr + 1) > f(*ptr) {
                *ptr = (*ptr + 1) % n;
                steps += 1;
            }
        }
        let base = hull[i];
        let hi = (hull[right] - base).dot(u);
        let lo = (hull[left] - base).dot(u);
        let height = (hull[top] - base).dot(v);
        let center = base + u * ((hi + lo) / 2.0) + v * (height / 2.0);
        let rect = canonical(center, hi - lo, height, u.y.atan2(u.x).to_degrees());
        best = Some(match best {
            Some(b) if !better(&rect, &b) => b,
            _ => rect,
        });
    }
    let rect = best.unwrap();
    if !(rect.h > 0.0) {
        return Err(Error::DegeneratePolygon);
    }
    Ok(rect)
}

/// Smaller area wins. Equal-area candidates (every edge of a triangle gives
/// one) prefer the longer `w`, then the smaller angle, so the choice does not
/// depend on where the hull starts.
fn better(a: &RotatedRect, b: &RotatedRect) -> bool {
    let near = |x: f64, y: f64| (x - y).abs() <= SQUARE_EPS * x.abs().max(y.abs());
    if !near(a.area(), b.area()) {
        return a.area() < b.area();
    }
    if !near(a.w, b.w) {
        return a.w > b.w;
    }
    a.theta < b.theta
}

fn canonical(center: Point, side_u: f64, side_v: f64, theta_u: f64) -> RotatedRect {
    let (w, h, theta) = if side_u >= side_v { (side_u, side_v, theta_u) } else { (side_v, side_u, theta_u + 90.0) };
    let period = if (w - h).abs() <= SQUARE_EPS * w { 90.0 } else { 180.0 };
    RotatedRect { center, w, h, theta: normalize_degrees(theta, period) }
}

pub fn polygon_area(poly: &Polygon) -> f64 {
    poly.area()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    /// Area threshold in px². Defaults to 0.5% of the image area.
    pub delta: Option<f64>,
    /// Grid cell edge in px. Defaults to `sqrt(delta)`.
    pub p_grid: Option<f64>,
    /// Strokes per decomposed region. Defaults to `ceil(area / delta)`.
    pub p_group: Option<usize>,
    /// Upper bound on the derived `p_group`.
    pub max_strokes_per_region: usize,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self { delta: None, p_grid: None, p_group: None, max_strokes_per_region: 64 }
    }
}

impl DecompositionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta", self.delta), ("p_grid", self.p_grid)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Config(format!("decomposition.{name} must be positive, got {v}")));
                }
            }
        }
        if self.p_group == Some(0) || self.max_strokes_per_region == 0 {
            return Err(Error::Config("decomposition stroke counts must be positive".into()));
        }
        Ok(())
    }

    /// Fills in the image-dependent defaults.
    pub fn resolve(&self, width: u32, height: u32) -> Decomposition {
        let delta = self.delta.unwrap_or(0.005 * width as f64 * height as f64).max(f64::MIN_POSITIVE);
        Decomposition {
            delta,
            p_grid: self.p_grid.unwrap_or(delta.sqrt()),
            p_group: self.p_group,
            max_strokes_per_region: self.max_strokes_per_region,
        }
    }
}

/// Decomposition parameters for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub delta: f64,
    pub p_grid: f64,
    pub p_group: Option<usize>,
    pub max_strokes_per_region: usize,
}

impl Decomposition {
    pub fn p_group_for(&self, area: f64) -> usize {
        self.p_group.unwrap_or_else(|| ((area / self.delta).ceil() as usize).clamp(1, self.max_strokes_per_region))
    }
}

fn ring_to_geo(ring: &[Point]) -> LineString<f64> {
    LineString::new(ring.iter().map(|p| Coord { x: p.x, y: p.y }).collect())
}

fn to_geo(poly: &Polygon) -> geo::Polygon<f64> {
    geo::Polygon::new(ring_to_geo(&poly.exterior), poly.holes.iter().map(|h| ring_to_geo(h)).collect())
}

fn ring_from_geo(ls: &LineString<f64>) -> Vec<Point> {
    let mut pts: Vec<Point> = ls.coords().map(|c| Point::new(c.x, c.y)).collect();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    pts
}

fn from_geo(mp: MultiPolygon<f64>) -> Vec<Polygon> {
    mp.into_iter()
        .filter_map(|p| {
            let holes = p.interiors().iter().map(ring_from_geo).filter(|h| h.len() >= 3).collect();
            Polygon::with_holes(ring_from_geo(p.exterior()), holes).ok()
        })
        .collect()
}

fn rect_geo(x0: f64, y0: f64, x1: f64, y1: f64) -> geo::Polygon<f64> {
    geo::Polygon::new(ring_to_geo(&[Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)]), vec![])
}

/// Intersects `poly` with a grid of `p_grid`-sized cells anchored at its
/// bounding box's top-left corner. Cells are emitted row by row, alternating
/// direction (left to right, then right to left), so consecutive cells are
/// neighbours. A cell cut into several pieces yields each piece.
pub fn grid_decompose(poly: &Polygon, p_grid: f64) -> Result<Vec<Polygon>> {
    if !(p_grid > 0.0) || !p_grid.is_finite() {
        return Err(Error::Config(format!("p_grid must be positive, got {p_grid}")));
    }
    let (lo, hi) = poly.bounds();
    let cols = (((hi.x - lo.x) / p_grid).ceil() as usize).max(1);
    let rows = (((hi.y - lo.y) / p_grid).ceil() as usize).max(1);
    if rows == 1 && cols == 1 {
        return Ok(vec![poly.clone()]);
    }
    let source = to_geo(poly);
    let edge = |i: usize, n: usize, lo: f64, hi: f64| if i == n { hi } else { lo + i as f64 * p_grid };
    let mut cells = Vec::new();
    for r in 0..rows {
        let (y0, y1) = (edge(r, rows, lo.y, hi.y), edge(r + 1, rows, lo.y, hi.y));
        let strip = source.intersection(&rect_geo(lo.x, y0, hi.x, y1));
        if strip.0.is_empty() {
            continue;
        }
        let order: Vec<usize> = if r % 2 == 0 { (0..cols).collect() } else { (0..cols).rev().collect() };
        for c in order {
            let (x0, x1) = (edge(c, cols, lo.x, hi.x), edge(c + 1, cols, lo.x, hi.x));
            let mut pieces = from_geo(strip.intersection(&rect_geo(x0, y0, x1, y1)));
            pieces.sort_by(|a, b| {
                let (pa, pb) = (a.bounds().0, b.bounds().0);
                pa.y.total_cmp(&pb.y).then(pa.x.total_cmp(&pb.x))
            });
            cells.extend(pieces);
        }
    }
    Ok(cells)
}

/// The union of a run of grid cells. Non-adjacent cells stay separate parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SubRegion {
    pub parts: Vec<Polygon>,
}

impl SubRegion {
    pub fn area(&self) -> f64 {
        self.parts.iter().map(Polygon::area).sum()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.parts.iter().flat_map(|p| p.vertices())
    }

    pub fn centroid(&self) -> Result<Point> {
        let mut acc = Point::default();
        let mut total = 0.0;
        for p in &self.parts {
            let a = p.area();
            acc = acc + p.centroid()? * a;
            total += a;
        }
        if total <= 0.0 {
            return Err(Error::DegeneratePolygon);
        }
        Ok(acc * (1.0 / total))
    }
}

/// Splits the cell sequence into `min(p_group, cells.len())` consecutive runs
/// of roughly equal area and unions each run.
pub fn group_cells(cells: &[Polygon], p_group: usize) -> Vec<SubRegion> {
    let n = cells.len();
    let m = p_group.clamp(1, n.max(1));
    if n == 0 {
        return Vec::new();
    }
    let areas: Vec<f64> = cells.iter().map(Polygon::area).collect();
    let total: f64 = areas.iter().sum();
    let mut runs: Vec<Vec<usize>> = vec![Vec::new()];
    let mut acc = 0.0;
    for i in 0..n {
        runs.last_mut().unwrap().push(i);
        acc += areas[i];
        let closed = runs.len();
        if closed == m {
            continue;
        }
        let cells_left = n - i - 1;
        let groups_left = m - closed;
        let target = total * closed as f64 / m as f64;
        if cells_left == groups_left || (acc >= target - 1e-9 * total && cells_left >= groups_left) {
            runs.push(Vec::new());
        }
    }
    runs.into_iter()
        .map(|run| {
            if run.len() == 1 {
                return SubRegion { parts: vec![cells[run[0]].clone()] };
            }
            let geos: Vec<geo::Polygon<f64>> = run.iter().map(|&i| to_geo(&cells[i])).collect();
            SubRegion { parts: from_geo(geo::unary_union(&geos)) }
        })
        .collect()
}

/// One stroke per sub-region, in sub-region order, all in the region fill.
pub fn strokes_for_region(poly: &Polygon, fill: [u8; 3], cfg: &Decomposition) -> Result<Vec<StrokeParams>> {
    let area = poly.area();
    if area <= cfg.delta {
        return Ok(vec![StrokeParams::from_rect(min_rotated_rect(poly)?, fill)]);
    }
    let cells = grid_decompose(poly, cfg.p_grid)?;
    let mut strokes = Vec::new();
    for sub in group_cells(&cells, cfg.p_group_for(area)) {
        let pts: Vec<Point> = sub.vertices().collect();
        match min_rect_of_points(&pts) {
            Ok(rect) => strokes.push(StrokeParams::from_rect(rect, fill)),
            // Sliver cells along the grid can collapse to a line.
            Err(Error::DegeneratePolygon) => log::debug!("skipping degenerate sub-region of area {}", sub.area()),
            Err(e) => return Err(e),
        }
    }
    if strokes.is_empty() {
        strokes.push(StrokeParams::from_rect(min_rotated_rect(poly)?, fill));
    }
    Ok(strokes)
}
