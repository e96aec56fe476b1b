use serde::{Deserialize, Serialize};

use super::{PatchWindow, Raster, Rgba};
use crate::error::{Error, Result};
use crate::mask::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlendMode {
    /// `C = (C_base * C_overlay) * (1 - A_overlay) + C_base * A_overlay`,
    /// `A = A_base * (1 - A_overlay) + A_overlay`.
    #[default]
    Paper,
    /// Ordinary overlay-over-base compositing.
    SourceOver,
}

impl std::str::FromStr for BlendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "source-over" | "source_over" => Ok(Self::SourceOver),
            other => Err(Error::Config(format!("unknown blend mode `{other}` (expected `paper` or `source-over`)"))),
        }
    }
}

pub fn blend_pixel(base: Rgba, overlay: Rgba, mode: BlendMode) -> Rgba {
    let (ab, ao) = (base[3], overlay[3]);
    match mode {
        BlendMode::Paper => {
            let c = |i: usize| (base[i] * overlay[i]) * (1.0 - ao) + base[i] * ao;
            [c(0), c(1), c(2), ab * (1.0 - ao) + ao]
        }
        BlendMode::SourceOver => {
            let a = ao + ab * (1.0 - ao);
            if a <= 0.0 {
                return [0.0; 4];
            }
            let c = |i: usize| (overlay[i] * ao + base[i] * ab * (1.0 - ao)) / a;
            [c(0), c(1), c(2), a]
        }
    }
}

pub fn blend(base: &Raster, overlay: &Raster, mode: BlendMode) -> Result<Raster> {
    if base.dimensions() != overlay.dimensions() {
        return Err(Error::DimensionMismatch { expected: base.dimensions(), actual: overlay.dimensions() });
    }
    let data = base.pixels().iter().zip(overlay.pixels()).map(|(&b, &o)| blend_pixel(b, o, mode)).collect();
    Ok(Raster::from_vec(base.width(), base.height(), data))
}

/// Flat `fill` everywhere in `window`, opaque where `mask` is set and
/// `keep` accepts the canvas pixel.
pub(crate) fn make_base_where(mask: &Mask, fill: [u8; 3], window: PatchWindow, keep: impl Fn(u32, u32) -> bool) -> Raster {
    let [r, g, b] = fill.map(|c| c as f64 / 255.0);
    Raster::from_fn(window.width, window.height, |i, j| {
        let (x, y) = (window.x0 + i as i64, window.y0 + j as i64);
        let inside = mask.get_i(x, y) && keep(x as u32, y as u32);
        [r, g, b, if inside { 1.0 } else { 0.0 }]
    })
}

/// Polygon image over `window`: the fill colour, alpha 1 on the mask and 0
/// elsewhere.
pub fn make_base(mask: &Mask, fill: [u8; 3], window: PatchWindow) -> Result<Raster> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(make_base_where(mask, fill, window, |_, _| true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::BBox;
    use proptest::prelude::*;

    fn raster(seed: &[f64], w: u32, h: u32) -> Raster {
        Raster::from_fn(w, h, |x, y| {
            let k = (y * w + x) as usize * 4;
            std::array::from_fn(|c| seed[(k + c) % seed.len()])
        })
    }

    #[test]
    fn scalar_example() {
        let r = blend_pixel([0.5, 0.5, 0.5, 1.0], [0.8, 0.8, 0.8, 0.25], BlendMode::Paper);
        let expect: f64 = 0.5 * 0.8 * (1.0 - 0.25) + 0.5 * 0.25;
        assert_eq!(r[0].to_bits(), expect.to_bits());
        assert!((r[0] - 0.425).abs() < 1e-15);
        assert_eq!(r[3], 1.0);
    }

    #[test]
    fn mismatched_dimensions() {
        let a = Raster::new(2, 2, [0.0; 4]);
        let b = Raster::new(3, 2, [0.0; 4]);
        assert!(matches!(blend(&a, &b, BlendMode::Paper), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn source_over_opaque_overlay_wins() {
        let r = blend_pixel([0.1, 0.2, 0.3, 1.0], [0.9, 0.8, 0.7, 1.0], BlendMode::SourceOver);
        assert_eq!(r, [0.9, 0.8, 0.7, 1.0]);
        let t = blend_pixel([0.1, 0.2, 0.3, 0.5], [0.9, 0.8, 0.7, 0.0], BlendMode::SourceOver);
        assert!((t[0] - 0.1).abs() < 1e-15 && t[3] == 0.5);
    }

    #[test]
    fn base_from_mask() {
        let mask = Mask::from_fn(6, 6, BBox { x0: 0, y0: 0, x1: 6, y1: 6 }, |x, y| x <= y);
        let base = make_base(&mask, [255, 0, 0], PatchWindow { x0: 0, y0: 0, width: 6, height: 6 }).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                let p = base.get(x, y);
                assert_eq!(p[3], if x <= y { 1.0 } else { 0.0 });
                assert_eq!(&p[..3], &[1.0, 0.0, 0.0]);
            }
        }
        assert_eq!(base.pixels().iter().filter(|p| p[3] == 1.0).count(), mask.count());
        let empty = Mask::empty(6, 6, BBox { x0: 0, y0: 0, x1: 0, y1: 0 });
        assert!(matches!(make_base(&empty, [0; 3], PatchWindow { x0: 0, y0: 0, width: 1, height: 1 }), Err(Error::EmptyMask)));
    }

    proptest! {
        #[test]
        fn boundary_identities(seed in prop::collection::vec(0.0f64..=1.0, 16..64), w in 1u32..8, h in 1u32..8) {
            let base = raster(&seed, w, h);
            let over = raster(&seed.iter().rev().copied().collect::<Vec<_>>(), w, h);
            let opaque = Raster::from_fn(w, h, |x, y| { let p = over.get(x, y); [p[0], p[1], p[2], 1.0] });
            let clear = Raster::from_fn(w, h, |x, y| { let p = over.get(x, y); [p[0], p[1], p[2], 0.0] });
            let r1 = blend(&base, &opaque, BlendMode::Paper).unwrap();
            let r0 = blend(&base, &clear, BlendMode::Paper).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let (b, o) = (base.get(x, y), over.get(x, y));
                    prop_assert_eq!(r1.get(x, y), [b[0], b[1], b[2], 1.0]);
                    prop_assert_eq!(r0.get(x, y), [b[0] * o[0], b[1] * o[1], b[2] * o[2], b[3]]);
                }
            }
        }

        #[test]
        fn output_stays_in_unit_range(b in prop::array::uniform4(0.0f64..=1.0), o in prop::array::uniform4(0.0f64..=1.0)) {
            for mode in [BlendMode::Paper, BlendMode::SourceOver] {
                let r = blend_pixel(b, o, mode);
                prop_assert!(r.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)), "{:?}", r);
            }
        }
    }
}
