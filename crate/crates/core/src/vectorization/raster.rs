//! Even-odd scanline fill of polygons, sampled at pixel centres.

use crate::geom::{BBox, Point};
use crate::mask::Mask;

/// Fills every ring of `rings` with the even-odd rule. Pixel `(x, y)` is set
/// when its centre `(x + 0.5, y + 0.5)` lies inside.
pub fn rasterize_rings(rings: &[&[Point]], width: u32, height: u32) -> Mask {
    let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in rings.iter().flat_map(|r| r.iter()) {
        lo_x = lo_x.min(p.x);
        hi_x = hi_x.max(p.x);
        lo_y = lo_y.min(p.y);
        hi_y = hi_y.max(p.y);
    }
    let clamp = |v: f64, max: u32| v.clamp(0.0, max as f64) as u32;
    let window = BBox {
        x0: clamp(lo_x.floor(), width),
        y0: clamp(lo_y.floor(), height),
        x1: clamp(hi_x.ceil(), width),
        y1: clamp(hi_y.ceil(), height),
    };
    if window.x0 >= window.x1 || window.y0 >= window.y1 {
        return Mask::empty(width, height, BBox { x0: 0, y0: 0, x1: 0, y1: 0 });
    }
    let mut mask = Mask::empty(width, height, window);
    let mut xs: Vec<f64> = Vec::new();
    for y in window.y0..window.y1 {
        let yc = y as f64 + 0.5;
        xs.clear();
        for ring in rings {
            let n = ring.len();
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                if (a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y) {
                    xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            // Centres x + 0.5 in [left, right).
            let start = (pair[0] - 0.5).ceil().max(window.x0 as f64);
            let end = (pair[1] - 0.5).ceil().min(window.x1 as f64);
            let mut x = start;
            while x < end {
                mask.set(x as u32, y, true);
                x += 1.0;
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_covers_its_pixels() {
        let sq = [Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(10.0, 10.0), Point::new(0.0, 10.0)];
        let m = rasterize_rings(&[&sq], 20, 20);
        assert_eq!(m.count(), 100);
        assert!(m.get(0, 0) && m.get(9, 9) && !m.get(10, 10));
    }

    #[test]
    fn clipped_to_image() {
        let sq = [Point::new(-5.0, -5.0), Point::new(5.0, -5.0), Point::new(5.0, 5.0), Point::new(-5.0, 5.0)];
        assert_eq!(rasterize_rings(&[&sq], 8, 8).count(), 25);
        let off = [Point::new(50.0, 50.0), Point::new(60.0, 50.0), Point::new(60.0, 60.0)];
        assert!(rasterize_rings(&[&off], 8, 8).is_empty());
    }
}
