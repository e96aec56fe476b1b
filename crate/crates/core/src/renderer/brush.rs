use std::path::Path;

use image::RgbaImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PatchWindow, Raster, Rgba};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::stroke_geometry::StrokeParams;

const PROCEDURAL_SIZE: (u32, u32) = (160, 64);
const FOOTPRINT_EXPONENT: f64 = 8.0;
const EDGE_START: f64 = 0.95;
const STREAK_ALPHA_DEPTH: f64 = 0.08;
const STREAK_TONE_DEPTH: f64 = 0.06;
const STREAK_KNOTS: usize = 24;

/// Brush image: grayscale texture in RGB, footprint in alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct BrushTemplate {
    pixels: Raster,
}

impl BrushTemplate {
    pub fn new(pixels: Raster) -> Result<Self> {
        if pixels.width() == 0 || pixels.height() == 0 || !pixels.pixels().iter().any(|p| p[3] > 0.0) {
            return Err(Error::InvalidImage("brush template has an empty footprint".into()));
        }
        Ok(Self { pixels })
    }

    /// Rounded-rectangle footprint with a soft rim and lengthwise streaks.
    pub fn procedural(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let knots: Vec<f64> = (0..=STREAK_KNOTS).map(|_| rng.gen::<f64>()).collect();
        let streak = |v: f64| {
            let t = v.clamp(0.0, 1.0) * STREAK_KNOTS as f64;
            let i = (t.floor() as usize).min(STREAK_KNOTS - 1);
            let f = t - i as f64;
            let s = (1.0 - (f * std::f64::consts::PI).cos()) / 2.0;
            knots[i] * (1.0 - s) + knots[i + 1] * s
        };
        let (w, h) = PROCEDURAL_SIZE;
        let pixels = Raster::from_fn(w, h, |x, y| {
            let u = (x as f64 + 0.5) / w as f64 * 2.0 - 1.0;
            let v = (y as f64 + 0.5) / h as f64 * 2.0 - 1.0;
            let d = (u.abs().powf(FOOTPRINT_EXPONENT) + v.abs().powf(FOOTPRINT_EXPONENT)).powf(1.0 / FOOTPRINT_EXPONENT);
            let rim = ((1.0 - d) / (1.0 - EDGE_START)).clamp(0.0, 1.0);
            let n = streak((v + 1.0) / 2.0);
            let tone = 1.0 - STREAK_TONE_DEPTH * n;
            [tone, tone, tone, rim * (1.0 - STREAK_ALPHA_DEPTH * n)]
        });
        Self { pixels }
    }

    /// Loads an RGBA image. Images without any transparency are read as
    /// ink on paper: darker pixels become more opaque.
    pub fn open(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::image(path, e))?.to_rgba8();
        Self::from_rgba8(&img)
    }

    pub fn from_rgba8(img: &RgbaImage) -> Result<Self> {
        let opaque = img.pixels().all(|p| p[3] == 255);
        let pixels = Raster::from_fn(img.width(), img.height(), |x, y| {
            let p = img.get_pixel(x, y).0;
            if opaque {
                let lum = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
                [1.0, 1.0, 1.0, (255_000 - lum) as f64 / 255_000.0]
            } else {
                p.map(|c| c as f64 / 255.0)
            }
        });
        Self::new(pixels)
    }

    pub fn raster(&self) -> &Raster {
        &self.pixels
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.pixels.width() as f64 / self.pixels.height() as f64
    }

    /// Bilinear sample of the template tinted by `tint`, at continuous
    /// coordinates (pixel centres at `+0.5`). Taps off the template read as
    /// untinted transparent white.
    fn sample(&self, sx: f64, sy: f64, tint: [f64; 3]) -> Rgba {
        const OUTSIDE: Rgba = [1.0, 1.0, 1.0, 0.0];
        let (w, h) = (self.pixels.width() as i64, self.pixels.height() as i64);
        // Offsets within 1e-9 of a pixel centre count as on it, so exact
        // placements reproduce the template bit for bit.
        let split = |f: f64| {
            let r = f.round();
            if (f - r).abs() < 1e-9 { (r as i64, 0.0) } else { (f.floor() as i64, f - f.floor()) }
        };
        let ((x0, tx), (y0, ty)) = (split(sx - 0.5), split(sy - 0.5));
        let at = |x: i64, y: i64| {
            if x < 0 || y < 0 || x >= w || y >= h {
                OUTSIDE
            } else {
                let p = self.pixels.get(x as u32, y as u32);
                [p[0] * tint[0], p[1] * tint[1], p[2] * tint[2], p[3]]
            }
        };
        let (p00, p10, p01, p11) = (at(x0, y0), at(x0 + 1, y0), at(x0, y0 + 1), at(x0 + 1, y0 + 1));
        std::array::from_fn(|c| {
            let top = if tx == 0.0 { p00[c] } else { p00[c] * (1.0 - tx) + p10[c] * tx };
            let bottom = if tx == 0.0 { p01[c] } else { p01[c] * (1.0 - tx) + p11[c] * tx };
            if ty == 0.0 { top } else { top * (1.0 - ty) + bottom * ty }
        })
    }
}

/// A brush raster placed on the canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedBrush {
    pub window: PatchWindow,
    pub raster: Raster,
}

/// Canvas pixels touched by a stroke's oriented rectangle.
pub fn stroke_window(s: &StrokeParams) -> PatchWindow {
    let corners = s.rect().corners();
    let lo = corners.iter().fold(Point::new(f64::INFINITY, f64::INFINITY), |a, p| Point::new(a.x.min(p.x), a.y.min(p.y)));
    let hi = corners.iter().fold(Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| Point::new(a.x.max(p.x), a.y.max(p.y)));
    // Shave rounding noise so exact integer extents stay exact.
    let snap = |v: f64| if (v - v.round()).abs() < 1e-9 { v.round() } else { v };
    let (x0, y0) = (snap(lo.x).floor() as i64, snap(lo.y).floor() as i64);
    let (x1, y1) = (snap(hi.x).ceil() as i64, snap(hi.y).ceil() as i64);
    PatchWindow { x0, y0, width: (x1 - x0).max(1) as u32, height: (y1 - y0).max(1) as u32 }
}

/// Scales the template to `w x h`, tints it by the stroke colour and rotates
/// it by `theta` about the stroke centre, in one inverse-mapped bilinear
/// pass. Canvas pixels beyond the template are transparent white. `None`
/// when either side is under one pixel.
pub fn transform_brush(template: &BrushTemplate, s: &StrokeParams) -> Option<PlacedBrush> {
    if !(s.w >= 1.0 && s.h >= 1.0) {
        return None;
    }
    let window = stroke_window(s);
    let (u, v) = s.rect().axes();
    let (tw, th) = (template.pixels.width() as f64, template.pixels.height() as f64);
    let tint = s.color().map(|c| c as f64 / 255.0);
    let center = Point::new(s.x, s.y);
    let raster = Raster::from_fn(window.width, window.height, |i, j| {
        let p = Point::new((window.x0 + i as i64) as f64 + 0.5, (window.y0 + j as i64) as f64 + 0.5) - center;
        let sx = (p.dot(u) / s.w + 0.5) * tw;
        let sy = (p.dot(v) / s.h + 0.5) * th;
        template.sample(sx, sy, tint)
    });
    Some(PlacedBrush { window, raster })
}
