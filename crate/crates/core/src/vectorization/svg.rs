//! SVG export of vector regions: one `<g>` per segment, one even-odd
//! filled `<path>` per region.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::curve::{arc_sweep, circumcircle, CurveSegment};
use super::VectorRegion;
use crate::geom::Point;

fn num(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn pt(p: Point) -> String {
    format!("{} {}", num(p.x), num(p.y))
}

fn arc_command(d: &mut String, points: &[Point; 3], axis_ratio: f64, rotation: f64) {
    let ratio = if axis_ratio.is_finite() && axis_ratio > 0.0 { axis_ratio } else { 1.0 };
    let [a, m, b] = points.map(|p| {
        let r = p.rotated(-rotation);
        Point::new(r.x, r.y / ratio)
    });
    match circumcircle(a, m, b) {
        None => {
            let _ = write!(d, " L{} L{}", pt(points[1]), pt(points[2]));
        }
        Some((center, r)) => {
            let (_, sweep) = arc_sweep(center, a, m, b);
            let large = (sweep.abs() > std::f64::consts::PI) as u8;
            let positive = (sweep > 0.0) as u8;
            let _ = write!(
                d,
                " A{} {} {} {} {} {}",
                num(r),
                num(r * ratio),
                num(rotation),
                large,
                positive,
                pt(points[2])
            );
        }
    }
}

fn path_data(d: &mut String, path: &[CurveSegment]) {
    let Some(first) = path.first() else { return };
    let _ = write!(d, "M{}", pt(first.start()));
    for c in path {
        match c {
            CurveSegment::Line { points } => {
                let _ = write!(d, " L{}", pt(points[1]));
            }
            CurveSegment::QuadraticBezier { points } => {
                let _ = write!(d, " Q{} {}", pt(points[1]), pt(points[2]));
            }
            CurveSegment::CubicBezier { points } => {
                let _ = write!(d, " C{} {} {}", pt(points[1]), pt(points[2]), pt(points[3]));
            }
            CurveSegment::CircularArc { points } => arc_command(d, points, 1.0, 0.0),
            CurveSegment::EllipticalArc { points, axis_ratio, rotation } => arc_command(d, points, *axis_ratio, *rotation),
        }
    }
    d.push_str(" Z");
}

pub fn regions_to_svg(regions: &[VectorRegion], width: u32, height: u32) -> String {
    let mut by_segment: BTreeMap<usize, Vec<&VectorRegion>> = BTreeMap::new();
    for r in regions {
        by_segment.entry(r.source_segment_id).or_default().push(r);
    }
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for (seg, rs) in by_segment {
        let _ = writeln!(svg, r#"  <g id="segment-{seg}">"#);
        for r in rs {
            let mut d = String::new();
            path_data(&mut d, &r.outline);
            for h in &r.holes {
                d.push(' ');
                path_data(&mut d, h);
            }
            let [cr, cg, cb] = r.fill;
            let _ = writeln!(
                svg,
                r##"    <path id="region-{}" fill="#{cr:02x}{cg:02x}{cb:02x}" fill-rule="evenodd" d="{d}"/>"##,
                r.id
            );
        }
        svg.push_str("  </g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}
