//! Contour extraction along pixel edges.
//!
//! Every boundary edge of a set pixel becomes a directed unit edge with the
//! pixel on its left, so outer boundaries come out counterclockwise
//! (positive shoelace area) and holes clockwise. Where two pixels touch only
//! at a corner the walk turns to stay on the current pixel, which keeps
//! 4-connected components apart.

use std::collections::HashMap;

use crate::geom::{signed_area, Point};
use crate::mask::Mask;

type Vertex = (i64, i64);

/// Boundaries of one 4-connected component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentContours {
    pub outer: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
    pub pixels: usize,
}

/// All closed boundary polylines of `layer`: one outer ring per
/// 4-connected component and one per hole. Vertices sit on the pixel
/// lattice and collinear runs are collapsed.
pub fn trace_contours(layer: &Mask) -> Vec<Vec<Point>> {
    trace_components(layer)
        .into_iter()
        .flat_map(|c| std::iter::once(c.outer).chain(c.holes))
        .collect()
}

/// Per-component tracing, components in raster order of their first pixel.
pub fn trace_components(layer: &Mask) -> Vec<ComponentContours> {
    let win = layer.window();
    let (ww, wh) = (win.width() as usize, win.height() as usize);
    let mut label = vec![u32::MAX; ww * wh];
    let mut out = Vec::new();
    let mut next_label = 0u32;

    for start in 0..ww * wh {
        let (sx, sy) = ((start % ww) as u32 + win.x0, (start / ww) as u32 + win.y0);
        if label[start] != u32::MAX || !layer.get(sx, sy) {
            continue;
        }
        let id = next_label;
        next_label += 1;
        let mut pixels = Vec::new();
        let mut stack = vec![start];
        label[start] = id;
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (px, py) = (p % ww, p / ww);
            let mut visit = |q: usize| {
                let (qx, qy) = ((q % ww) as u32 + win.x0, (q / ww) as u32 + win.y0);
                if label[q] == u32::MAX && layer.get(qx, qy) {
                    label[q] = id;
                    stack.push(q);
                }
            };
            if px > 0 {
                visit(p - 1);
            }
            if px + 1 < ww {
                visit(p + 1);
            }
            if py > 0 {
                visit(p - ww);
            }
            if py + 1 < wh {
                visit(p + ww);
            }
        }
        pixels.sort_unstable();
        let loops = component_loops(&pixels, &label, id, ww, wh, win.x0 as i64, win.y0 as i64);
        out.extend(assemble(loops, pixels.len()));
    }
    out
}

fn component_loops(pixels: &[usize], label: &[u32], id: u32, ww: usize, wh: usize, ox: i64, oy: i64) -> Vec<Vec<Point>> {
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < ww && (y as usize) < wh && label[y as usize * ww + x as usize] == id;
    let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
    for &p in pixels {
        let (x, y) = ((p % ww) as i64, (p / ww) as i64);
        if !inside(x, y - 1) {
            edges.push(((x, y), (x + 1, y)));
        }
        if !inside(x + 1, y) {
            edges.push(((x + 1, y), (x + 1, y + 1)));
        }
        if !inside(x, y + 1) {
            edges.push(((x + 1, y + 1), (x, y + 1)));
        }
        if !inside(x - 1, y) {
            edges.push(((x, y + 1), (x, y)));
        }
    }
    let mut outgoing: HashMap<Vertex, Vec<usize>> = HashMap::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        outgoing.entry(e.0).or_default().push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for first in 0..edges.len() {
        if used[first] {
            continue;
        }
        let mut ring: Vec<Vertex> = Vec::new();
        let mut cur = first;
        loop {
            used[cur] = true;
            let (a, b) = edges[cur];
            ring.push(a);
            let dir = (b.0 - a.0, b.1 - a.1);
            let next = outgoing[&b]
                .iter()
                .copied()
                .filter(|&e| !used[e])
                .max_by_key(|&e| {
                    let (c, d) = edges[e];
                    let nd = (d.0 - c.0, d.1 - c.1);
                    dir.0 * nd.1 - dir.1 * nd.0
                });
            match next {
                Some(n) => cur = n,
                None => break,
            }
        }
        loops.push(simplify(&ring, ox, oy));
    }
    loops
}

/// Cuts the lattice corners of a traced ring that touch a unit edge half a
/// pixel back along both edges. Staircases become straight diagonals while
/// long straight edges keep their corners, and every pixel centre stays on
/// its original side of the boundary.
pub fn chamfer(ring: &[Point]) -> Vec<Point> {
    let n = ring.len();
    let mut out: Vec<Point> = Vec::with_capacity(2 * n);
    let mut push = |p: Point| {
        if out.last() != Some(&p) {
            out.push(p);
        }
    };
    for i in 0..n {
        let (p, v, q) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
        let (dp, dq) = (v.distance(p), v.distance(q));
        if dp <= 1.0 || dq <= 1.0 {
            push(v.lerp(p, 0.5 / dp));
            push(v.lerp(q, 0.5 / dq));
        } else {
            push(v);
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

fn simplify(ring: &[Vertex], ox: i64, oy: i64) -> Vec<Point> {
    let n = ring.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let p = ring[(i + n - 1) % n];
        let c = ring[i];
        let q = ring[(i + 1) % n];
        let cross = (c.0 - p.0) * (q.1 - c.1) - (c.1 - p.1) * (q.0 - c.0);
        if cross != 0 {
            out.push(Point::new((c.0 + ox) as f64, (c.1 + oy) as f64));
        }
    }
    out
}

fn assemble(loops: Vec<Vec<Point>>, pixels: usize) -> Vec<ComponentContours> {
    let mut outers: Vec<Vec<Point>> = Vec::new();
    let mut holes = Vec::new();
    for l in loops {
        if signed_area(&l) > 0.0 {
            outers.push(l);
        } else {
            holes.push(l);
        }
    }
    outers.sort_by(|a, b| signed_area(b).total_cmp(&signed_area(a)));
    let mut out: Vec<ComponentContours> = outers
        .into_iter()
        .map(|outer| {
            let area = signed_area(&outer).round() as usize;
            ComponentContours { outer, holes: Vec::new(), pixels: area }
        })
        .collect();
    let rest: usize = out.iter().skip(1).map(|c| c.pixels).sum();
    if let Some(main) = out.first_mut() {
        main.holes = holes;
        main.pixels = pixels.saturating_sub(rest);
    }
    out
}
