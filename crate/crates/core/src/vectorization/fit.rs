//! Piecewise curve fitting of closed polylines.
//!
//! The polyline is densified to at most one pixel between samples, split
//! at corners (turning angle measured over a short arc-length window so
//! pixel staircases are not mistaken for corners), and every run between
//! breakpoints is fitted in turn by a line, a quadratic Bézier through the
//! end tangents' intersection, or a least-squares cubic Bézier with Newton
//! reparameterization. Runs that still miss the tolerance are split at the
//! worst sample and fitted recursively. Every accepted piece keeps every
//! sample within `fit_tolerance` of the curve.

use crate::error::{Error, Result};
use crate::geom::{point_segment_distance, signed_area, Point};

use super::curve::{cubic_point, quadratic_point, CurveSegment};
use super::TraceConfig;

const MAX_SPACING: f64 = 1.0;
const CORNER_WINDOW: f64 = 2.0;
const MAX_REPARAMETERIZATIONS: usize = 4;

pub fn fit_curves(polyline: &[Point], cfg: &TraceConfig) -> Result<Vec<CurveSegment>> {
    let mut pts: Vec<Point> = Vec::with_capacity(polyline.len());
    for &p in polyline {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 || signed_area(&pts).abs() <= 1e-12 {
        return Err(Error::DegenerateContour);
    }

    let Loop { points, is_vertex, arc } = densify(&pts);
    let n = points.len();
    let perimeter = arc[n];
    let window = CORNER_WINDOW.min(perimeter / 8.0);
    let lp = LoopView { points: &points, arc: &arc };

    let corners = detect_corners(&lp, &is_vertex, window, cfg.corner_angle_threshold);
    let breaks: Vec<(usize, bool)> = match corners.len() {
        0 => vec![(0, false), (lp.index_near(perimeter / 2.0), false)],
        1 => {
            let c = corners[0];
            vec![(c, true), (lp.index_near(arc[c] + perimeter / 2.0), false)]
        }
        _ => corners.iter().map(|&c| (c, true)).collect(),
    };

    let mut out = Vec::new();
    for j in 0..breaks.len() {
        let (a, a_sharp) = breaks[j];
        let (b, b_sharp) = breaks[(j + 1) % breaks.len()];
        let len = if b > a { b - a } else { b + n - a };
        let run: Vec<Point> = (0..=len).map(|k| points[(a + k) % n]).collect();
        let t_start = if a_sharp { one_sided_tangent(&run, window) } else { lp.central_tangent(a, window) };
        let t_end = if b_sharp {
            let rev: Vec<Point> = run.iter().rev().copied().collect();
            one_sided_tangent(&rev, window)
        } else {
            lp.central_tangent(b, window) * -1.0
        };
        fit_run(&run, t_start, t_end, cfg.fit_tolerance, &mut out);
    }
    Ok(out)
}

struct Loop {
    points: Vec<Point>,
    is_vertex: Vec<bool>,
    /// Cumulative arc length; `arc[n]` is the perimeter.
    arc: Vec<f64>,
}

fn densify(pts: &[Point]) -> Loop {
    let mut points = Vec::new();
    let mut is_vertex = Vec::new();
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        let steps = (a.distance(b) / MAX_SPACING).ceil().max(1.0) as usize;
        for k in 0..steps {
            points.push(a.lerp(b, k as f64 / steps as f64));
            is_vertex.push(k == 0);
        }
    }
    let n = points.len();
    let mut arc = Vec::with_capacity(n + 1);
    arc.push(0.0);
    for i in 0..n {
        arc.push(arc[i] + points[i].distance(points[(i + 1) % n]));
    }
    Loop { points, is_vertex, arc }
}

struct LoopView<'a> {
    points: &'a [Point],
    arc: &'a [f64],
}

impl LoopView<'_> {
    fn perimeter(&self) -> f64 {
        self.arc[self.points.len()]
    }

    fn point_at(&self, s: f64) -> Point {
        let n = self.points.len();
        let s = s.rem_euclid(self.perimeter());
        let i = match self.arc[..=n].binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => return self.points[i % n],
            Err(i) => i - 1,
        };
        let seg = self.arc[i + 1] - self.arc[i];
        let t = if seg > 0.0 { (s - self.arc[i]) / seg } else { 0.0 };
        self.points[i].lerp(self.points[(i + 1) % n], t)
    }

    fn index_near(&self, s: f64) -> usize {
        let n = self.points.len();
        let s = s.rem_euclid(self.perimeter());
        (0..n).min_by(|&a, &b| (self.arc[a] - s).abs().total_cmp(&(self.arc[b] - s).abs())).unwrap()
    }

    fn central_tangent(&self, i: usize, h: f64) -> Point {
        let s = self.arc[i];
        let t = (self.point_at(s + h) - self.point_at(s - h)).normalized();
        if t.norm() > 0.0 {
            t
        } else {
            let n = self.points.len();
            (self.points[(i + 1) % n] - self.points[(i + n - 1) % n]).normalized()
        }
    }
}

/// Turning angle over `±window` of arc length, corners above `threshold`
/// degrees, with non-maximum suppression inside the window.
fn detect_corners(lp: &LoopView, is_vertex: &[bool], window: f64, threshold: f64) -> Vec<usize> {
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for (i, &v) in is_vertex.iter().enumerate() {
        if !v {
            continue;
        }
        let s = lp.arc[i];
        let p = lp.points[i];
        let a = p - lp.point_at(s - window);
        let b = lp.point_at(s + window) - p;
        let angle = a.cross(b).abs().atan2(a.dot(b)).to_degrees();
        if angle >= threshold {
            candidates.push((i, angle));
        }
    }
    candidates.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let perimeter = lp.perimeter();
    let mut accepted: Vec<usize> = Vec::new();
    for (i, _) in candidates {
        let clear = accepted.iter().all(|&j| {
            let d = (lp.arc[i] - lp.arc[j]).abs();
            d.min(perimeter - d) >= window
        });
        if clear {
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    accepted
}

/// Tangent at `run[0]` pointing into the run, from the quadratic through
/// the start and two points further along (second-order accurate).
fn one_sided_tangent(run: &[Point], window: f64) -> Point {
    let total: f64 = run.windows(2).map(|w| w[0].distance(w[1])).sum();
    let h = (window * 0.5).min(total / 4.0).max(1e-9);
    let at = |target: f64| {
        let mut acc = 0.0;
        for w in run.windows(2) {
            let d = w[0].distance(w[1]);
            if acc + d >= target && d > 0.0 {
                return w[0].lerp(w[1], (target - acc) / d);
            }
            acc += d;
        }
        *run.last().unwrap()
    };
    let p0 = run[0];
    let t = ((at(h) - p0) * 4.0 - (at(2.0 * h) - p0)).normalized();
    if t.norm() > 0.0 {
        t
    } else {
        (run[1] - run[0]).normalized()
    }
}

fn chord_parameters(run: &[Point]) -> Vec<f64> {
    let mut u = Vec::with_capacity(run.len());
    u.push(0.0);
    for w in run.windows(2) {
        u.push(u.last().unwrap() + w[0].distance(w[1]));
    }
    let total = *u.last().unwrap();
    if total > 0.0 {
        u.iter_mut().for_each(|v| *v /= total);
    }
    u
}

fn fit_run(run: &[Point], t_start: Point, t_end: Point, tol: f64, out: &mut Vec<CurveSegment>) {
    let first = run[0];
    let last = *run.last().unwrap();
    if run.len() <= 2 || run.iter().all(|&p| point_segment_distance(p, first, last) <= tol) {
        out.push(CurveSegment::line(first, last));
        return;
    }

    if let Some(q) = fit_quadratic(run, t_start, t_end, tol) {
        out.push(q);
        return;
    }

    let mut u = chord_parameters(run);
    let mut cubic = generate_cubic(run, &u, t_start, t_end);
    let (mut err, mut worst) = max_cubic_error(run, &cubic, &u);
    if err <= tol {
        out.push(CurveSegment::CubicBezier { points: cubic });
        return;
    }
    if err <= tol * 4.0 {
        for _ in 0..MAX_REPARAMETERIZATIONS {
            u = reparameterize(run, &cubic, &u);
            cubic = generate_cubic(run, &u, t_start, t_end);
            let (e, w) = max_cubic_error(run, &cubic, &u);
            err = e;
            worst = w;
            if err <= tol {
                out.push(CurveSegment::CubicBezier { points: cubic });
                return;
            }
        }
    }

    let split = if worst == 0 || worst + 1 >= run.len() { run.len() / 2 } else { worst };
    let center = {
        let t = (run[split + 1] - run[split - 1]).normalized();
        if t.norm() > 0.0 {
            t
        } else {
            (run[split] - run[split - 1]).normalized()
        }
    };
    fit_run(&run[..=split], t_start, center * -1.0, tol, out);
    fit_run(&run[split..], center, t_end, tol, out);
}

fn fit_quadratic(run: &[Point], t_start: Point, t_end: Point, tol: f64) -> Option<CurveSegment> {
    let p0 = run[0];
    let p2 = *run.last().unwrap();
    let denom = t_start.cross(t_end);
    if denom.abs() < 1e-9 {
        return None;
    }
    let d = p2 - p0;
    let a = d.cross(t_end) / denom;
    let b = d.cross(t_start) / denom;
    if a <= 0.0 || b <= 0.0 {
        return None;
    }
    let ctrl = [p0, p0 + t_start * a, p2];
    let mut u = chord_parameters(run);
    for _ in 0..=MAX_REPARAMETERIZATIONS {
        let ok = run.iter().zip(&u).all(|(&p, &t)| quadratic_point(&ctrl, t).distance(p) <= tol);
        if ok {
            return Some(CurveSegment::QuadraticBezier { points: ctrl });
        }
        u = run
            .iter()
            .zip(&u)
            .map(|(&p, &t)| {
                let q = quadratic_point(&ctrl, t);
                let d1 = ((ctrl[1] - ctrl[0]) * (1.0 - t) + (ctrl[2] - ctrl[1]) * t) * 2.0;
                let d2 = (ctrl[2] - ctrl[1] * 2.0 + ctrl[0]) * 2.0;
                newton_step(q - p, d1, d2, t)
            })
            .collect();
    }
    None
}

fn newton_step(diff: Point, d1: Point, d2: Point, t: f64) -> f64 {
    let num = diff.dot(d1);
    let den = d1.dot(d1) + diff.dot(d2);
    if den.abs() < 1e-12 {
        t
    } else {
        (t - num / den).clamp(0.0, 1.0)
    }
}

fn generate_cubic(run: &[Point], u: &[f64], t_start: Point, t_end: Point) -> [Point; 4] {
    let p0 = run[0];
    let p3 = *run.last().unwrap();
    let (mut c11, mut c12, mut c22, mut x1, mut x2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&p, &t) in run.iter().zip(u) {
        let mt = 1.0 - t;
        let b0 = mt * mt * mt;
        let b1 = 3.0 * mt * mt * t;
        let b2 = 3.0 * mt * t * t;
        let b3 = t * t * t;
        let a1 = t_start * b1;
        let a2 = t_end * b2;
        c11 += a1.dot(a1);
        c12 += a1.dot(a2);
        c22 += a2.dot(a2);
        let tmp = p - (p0 * (b0 + b1) + p3 * (b2 + b3));
        x1 += a1.dot(tmp);
        x2 += a2.dot(tmp);
    }
    let det = c11 * c22 - c12 * c12;
    let seg = p0.distance(p3);
    let eps = 1e-6 * seg;
    let (mut al, mut ar) = if det.abs() > 1e-12 { ((x1 * c22 - x2 * c12) / det, (c11 * x2 - c12 * x1) / det) } else { (0.0, 0.0) };
    if al < eps || ar < eps {
        al = seg / 3.0;
        ar = seg / 3.0;
    }
    [p0, p0 + t_start * al, p3 + t_end * ar, p3]
}

fn max_cubic_error(run: &[Point], c: &[Point; 4], u: &[f64]) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, (&p, &t)) in run.iter().zip(u).enumerate() {
        let d = cubic_point(c, t).distance(p);
        if d > worst.0 {
            worst = (d, i);
        }
    }
    worst
}

fn reparameterize(run: &[Point], c: &[Point; 4], u: &[f64]) -> Vec<f64> {
    let d1c = [(c[1] - c[0]) * 3.0, (c[2] - c[1]) * 3.0, (c[3] - c[2]) * 3.0];
    let d2c = [(d1c[1] - d1c[0]) * 2.0, (d1c[2] - d1c[1]) * 2.0];
    run.iter()
        .zip(u)
        .map(|(&p, &t)| {
            let q = cubic_point(c, t);
            let d1 = quadratic_point(&d1c, t);
            let d2 = d2c[0].lerp(d2c[1], t);
            newton_step(q - p, d1, d2, t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorization::curve::CurveKind;
    use std::f64::consts::PI;

    fn rect(w: f64, h: f64) -> Vec<Point> {
        vec![Point::new(0.0, 0.0), Point::new(w, 0.0), Point::new(w, h), Point::new(0.0, h)]
    }

    /// Distance from `p` to a curve, by dense sampling.
    fn curve_distance(p: Point, c: &CurveSegment) -> f64 {
        let mut pts = vec![c.start()];
        c.flatten_into(1e-4, &mut pts);
        pts.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
    }

    fn path_distance(p: Point, curves: &[CurveSegment]) -> f64 {
        curves.iter().map(|c| curve_distance(p, c)).fold(f64::INFINITY, f64::min)
    }

    fn assert_closed(curves: &[CurveSegment]) {
        for i in 0..curves.len() {
            let next = &curves[(i + 1) % curves.len()];
            assert!(curves[i].end().distance(next.start()) <= 1e-6);
        }
    }

    #[test]
    fn rectangle_is_four_lines() {
        let curves = fit_curves(&rect(12.0, 5.0), &TraceConfig::default()).unwrap();
        assert_eq!(curves.len(), 4);
        assert!(curves.iter().all(|c| c.kind() == CurveKind::Line));
        assert_closed(&curves);
    }

    #[test]
    fn collinear_run_is_one_line() {
        // Triangle whose base carries extra collinear vertices.
        let poly = vec![
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.0),
            Point::new(7.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(5.0, 8.0),
        ];
        let curves = fit_curves(&poly, &TraceConfig::default()).unwrap();
        assert_eq!(curves.len(), 3);
        let base = curves.iter().find(|c| c.start() == Point::new(0.0, 0.0)).unwrap();
        assert_eq!(base.kind(), CurveKind::Line);
        assert_eq!(base.end(), Point::new(10.0, 0.0));
    }

    #[test]
    fn semicircle_fits_in_two_cubics() {
        let r = 20.0;
        let mut poly: Vec<Point> = (0..64).map(|i| {
            let t = PI * i as f64 / 63.0;
            Point::new(r * t.cos(), r * t.sin())
        }).collect();
        poly.reverse();
        let cfg = TraceConfig { fit_tolerance: 0.5, ..Default::default() };
        let curves = fit_curves(&poly, &cfg).unwrap();
        let arc_pieces: Vec<&CurveSegment> = curves.iter().filter(|c| c.kind() != CurveKind::Line).collect();
        let cubic = arc_pieces.iter().filter(|c| c.kind() == CurveKind::CubicBezier).count();
        assert!(cubic <= 2 && arc_pieces.len() <= 2, "{curves:?}");
        for p in &poly {
            assert!(path_distance(*p, &curves) <= 0.5 + 1e-9);
        }
        assert_closed(&curves);
    }

    #[test]
    fn staircase_disc_within_tolerance() {
        let m = crate::mask::Mask::from_fn(64, 64, crate::geom::BBox { x0: 0, y0: 0, x1: 64, y1: 64 }, |x, y| {
            let dx = x as f64 + 0.5 - 32.0;
            let dy = y as f64 + 0.5 - 32.0;
            dx * dx + dy * dy < 400.0
        });
        let rings = crate::vectorization::trace_contours(&m);
        let cfg = TraceConfig::default();
        let curves = fit_curves(&rings[0], &cfg).unwrap();
        assert!(curves.len() < 40, "{} pieces", curves.len());
        for p in &rings[0] {
            assert!(path_distance(*p, &curves) <= cfg.fit_tolerance + 1e-9);
        }
        assert_closed(&curves);
    }

    #[test]
    fn degenerate_inputs() {
        let line = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert!(matches!(fit_curves(&line, &TraceConfig::default()), Err(Error::DegenerateContour)));
        let two = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        assert!(matches!(fit_curves(&two, &TraceConfig::default()), Err(Error::DegenerateContour)));
    }

    #[test]
    fn single_pixel_outline() {
        let curves = fit_curves(&rect(1.0, 1.0), &TraceConfig::default()).unwrap();
        assert_eq!(curves.len(), 4);
        assert_closed(&curves);
    }
}
