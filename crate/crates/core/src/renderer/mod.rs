//! Stroke-by-stroke painting onto a canvas.
//!
//! Each stroke becomes a patch: the region's flat fill restricted to the
//! stroke rectangle (the base) and the scaled, rotated, tinted brush (the
//! overlay). The two are blended and the result is composited over the
//! canvas at the patch position.

mod blend;
mod brush;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{BBox, Point};
use crate::mask::Mask;
use crate::program::{RegionRecord, StrokeProgram, StrokeRecord};
use crate::vectorization::rasterize_region;

pub use blend::{blend, blend_pixel, make_base, BlendMode};
pub use brush::{stroke_window, transform_brush, BrushTemplate, PlacedBrush};

/// Straight (non-premultiplied) RGBA in `[0, 1]`.
pub type Rgba = [f64; 4];

/// Pixel slack when testing whether a region pixel lies in its stroke
/// rectangle. Covers the gap between rasterization and stroke flattening.
const RECT_SLACK: f64 = 0.5;

/// Strokes prepared in parallel ahead of the compositor.
const PREPARE_AHEAD: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<Rgba>,
}

impl Raster {
    pub fn new(width: u32, height: u32, value: Rgba) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgba) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub(crate) fn from_vec(width: u32, height: u32, data: Vec<Rgba>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize);
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> Rgba {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: Rgba) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn pixels(&self) -> &[Rgba] {
        &self.data
    }

    /// RGB rounded to 8 bits; alpha is dropped.
    pub fn to_rgb8(&self) -> RgbImage {
        let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let p = self.get(x, y);
            image::Rgb([q(p[0]), q(p[1]), q(p[2])])
        })
    }
}

/// Placement of a patch on the canvas; may extend past the borders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchWindow {
    pub x0: i64,
    pub y0: i64,
    pub width: u32,
    pub height: u32,
}

impl PatchWindow {
    /// The part inside a `width x height` canvas.
    pub fn clip(&self, width: u32, height: u32) -> Option<BBox> {
        let x0 = self.x0.max(0);
        let y0 = self.y0.max(0);
        let x1 = (self.x0 + self.width as i64).min(width as i64);
        let y1 = (self.y0 + self.height as i64).min(height as i64);
        (x0 < x1 && y0 < y1).then_some(BBox { x0: x0 as u32, y0: y0 as u32, x1: x1 as u32, y1: y1 as u32 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrokePatch {
    pub window: PatchWindow,
    pub base: Raster,
    pub overlay: Raster,
}

impl StrokePatch {
    pub fn new(window: PatchWindow, base: Raster, overlay: Raster) -> Result<Self> {
        let dims = (window.width, window.height);
        for r in [&base, &overlay] {
            if r.dimensions() != dims {
                return Err(Error::DimensionMismatch { expected: dims, actual: r.dimensions() });
            }
        }
        Ok(Self { window, base, overlay })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Canvas {
    raster: Raster,
    touched: Vec<bool>,
    touched_count: usize,
    step: usize,
}

impl Canvas {
    /// Opaque white.
    pub fn blank(width: u32, height: u32) -> Self {
        Self {
            raster: Raster::new(width, height, [1.0; 4]),
            touched: vec![false; width as usize * height as usize],
            touched_count: 0,
            step: 0,
        }
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Pixels that received non-zero paint so far.
    pub fn coverage(&self) -> usize {
        self.touched_count
    }

    pub fn to_rgb8(&self) -> RgbImage {
        self.raster.to_rgb8()
    }
}

/// Blends `patch` and composites it over the canvas. Returns the changed
/// canvas rectangle, or `None` (and leaves the canvas alone) when the patch
/// lies entirely off the canvas.
pub fn apply_stroke(canvas: &mut Canvas, patch: &StrokePatch, mode: BlendMode) -> Result<Option<BBox>> {
    let result = blend(&patch.base, &patch.overlay, mode)?;
    let (cw, ch) = canvas.raster.dimensions();
    let Some(clip) = patch.window.clip(cw, ch) else {
        return Ok(None);
    };
    for y in clip.y0..clip.y1 {
        for x in clip.x0..clip.x1 {
            let px = (x as i64 - patch.window.x0) as u32;
            let py = (y as i64 - patch.window.y0) as u32;
            let src = result.get(px, py);
            let a = src[3];
            if a <= 0.0 {
                continue;
            }
            let i = y as usize * cw as usize + x as usize;
            let dst = &mut canvas.raster.data[i];
            for c in 0..3 {
                dst[c] = src[c] * a + dst[c] * (1.0 - a);
            }
            dst[3] = a + dst[3] * (1.0 - a);
            if !canvas.touched[i] {
                canvas.touched[i] = true;
                canvas.touched_count += 1;
            }
        }
    }
    canvas.step += 1;
    Ok(Some(clip))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FramePolicy {
    EveryStroke,
    EveryN(usize),
    PerRegion,
    PerGroup,
    PerSegment,
    /// Every stroke up to [`FramePolicy::AUTO_LIMIT`] strokes, else per group.
    #[default]
    Auto,
}

impl FramePolicy {
    pub const AUTO_LIMIT: usize = 2000;

    fn resolve(self, strokes: usize) -> Self {
        match self {
            Self::Auto if strokes <= Self::AUTO_LIMIT => Self::EveryStroke,
            Self::Auto => Self::PerGroup,
            other => other,
        }
    }

    /// Whether a frame follows stroke `i` of `strokes`.
    fn frame_after(self, strokes: &[StrokeRecord], i: usize) -> bool {
        let Some(next) = strokes.get(i + 1) else { return true };
        let cur = &strokes[i];
        match self {
            Self::EveryStroke | Self::Auto => true,
            Self::EveryN(k) => (i + 1).is_multiple_of(k.max(1)),
            Self::PerRegion => next.region_id != cur.region_id,
            Self::PerGroup => next.group_id != cur.group_id,
            Self::PerSegment => next.segment_id != cur.segment_id,
        }
    }
}

impl fmt::Display for FramePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EveryStroke => f.write_str("every-stroke"),
            Self::EveryN(k) => write!(f, "every-{k}"),
            Self::PerRegion => f.write_str("per-region"),
            Self::PerGroup => f.write_str("per-group"),
            Self::PerSegment => f.write_str("per-segment"),
            Self::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for FramePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "every-stroke" => Self::EveryStroke,
            "per-region" => Self::PerRegion,
            "per-group" => Self::PerGroup,
            "per-segment" => Self::PerSegment,
            "auto" => Self::Auto,
            other => match other.strip_prefix("every-").and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if k > 0 => Self::EveryN(k),
                _ => {
                    return Err(Error::Config(format!(
                        "unknown frame policy `{other}` (expected every-stroke, every-<k>, per-region, per-group, per-segment or auto)"
                    )))
                }
            },
        })
    }
}

impl Serialize for FramePolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FramePolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct Frame {
    /// 1-based.
    pub index: usize,
    /// Rank of the last stroke applied before this frame.
    pub rank: usize,
    /// Canvas rectangle changed since the previous frame.
    pub changed: Option<BBox>,
    pub coverage: usize,
    pub image: RgbImage,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: RgbImage,
    pub canvas: Canvas,
    pub frames: usize,
    pub strokes_applied: usize,
    pub warnings: Vec<String>,
}

fn region_mask(index: &HashMap<usize, &RegionRecord>, region_id: usize, width: u32, height: u32) -> Result<Mask> {
    let region = index
        .get(&region_id)
        .ok_or_else(|| Error::ProgramInvalid(format!("stroke references missing region {region_id}")))?;
    Ok(rasterize_region(&region.region, width, height))
}

fn prepare(s: &StrokeRecord, mask: &Mask, fill: [u8; 3], brush: &BrushTemplate) -> Option<StrokePatch> {
    let placed = transform_brush(brush, &s.params)?;
    let rect = s.params.rect();
    let base = blend::make_base_where(mask, fill, placed.window, |x, y| {
        rect.contains(Point::new(x as f64 + 0.5, y as f64 + 0.5), RECT_SLACK)
    });
    Some(StrokePatch { window: placed.window, base, overlay: placed.raster })
}

/// Paints every stroke of `program` in order onto a blank canvas, calling
/// `on_frame` whenever `policy` asks for a frame. The last stroke always
/// produces a frame.
pub fn render_sequence(
    program: &StrokeProgram,
    brush: &BrushTemplate,
    mode: BlendMode,
    policy: FramePolicy,
    mut on_frame: impl FnMut(Frame) -> Result<()>,
) -> Result<RenderOutput> {
    let (w, h) = (program.header.width, program.header.height);
    let mut canvas = Canvas::blank(w, h);
    let strokes = &program.strokes;
    let policy = policy.resolve(strokes.len());
    let mut warnings = Vec::new();
    let mut frames = 0;
    let mut applied = 0;
    let mut changed: Option<BBox> = None;
    let mut masks: HashMap<usize, Mask> = HashMap::new();
    let index = program.region_index();

    for (chunk_no, chunk) in strokes.chunks(PREPARE_AHEAD).enumerate() {
        let mut ids: Vec<usize> = chunk.iter().map(|s| s.region_id).collect();
        ids.dedup();
        masks.retain(|id, _| ids.contains(id));
        let missing: Vec<usize> = ids.iter().copied().filter(|id| !masks.contains_key(id)).collect();
        let fresh = missing.par_iter().map(|&id| region_mask(&index, id, w, h).map(|m| (id, m))).collect::<Result<Vec<_>>>()?;
        masks.extend(fresh);

        let patches: Vec<Option<StrokePatch>> = chunk
            .par_iter()
            .map(|s| prepare(s, &masks[&s.region_id], s.params.color(), brush))
            .collect();

        for (k, (s, patch)) in chunk.iter().zip(patches).enumerate() {
            let i = chunk_no * PREPARE_AHEAD + k;
            match patch {
                None => warnings.push(format!("stroke {} skipped: {:.3} x {:.3} px is below one pixel", s.rank, s.params.w, s.params.h)),
                Some(p) => match apply_stroke(&mut canvas, &p, mode)? {
                    Some(bb) => {
                        applied += 1;
                        changed = Some(changed.map_or(bb, |c| c.union(&bb)));
                    }
                    None => warnings.push(format!("stroke {} skipped: patch lies outside the canvas", s.rank)),
                },
            }
            if policy.frame_after(strokes, i) {
                frames += 1;
                on_frame(Frame { index: frames, rank: s.rank, changed: changed.take(), coverage: canvas.coverage(), image: canvas.to_rgb8() })?;
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(RenderOutput { image: canvas.to_rgb8(), canvas, frames, strokes_applied: applied, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub mse: f64,
    /// Infinite for identical images (serialized as `null`).
    pub psnr: f64,
}

impl Fidelity {
    fn from_mse(mse: f64) -> Self {
        let psnr = if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() };
        Self { mse, psnr }
    }
}

/// Mean squared error over RGB scaled to `[0, 1]`, and the matching PSNR.
pub fn fidelity(rendered: &RgbImage, reference: &RgbImage) -> Result<Fidelity> {
    if rendered.dimensions() != reference.dimensions() {
        return Err(Error::DimensionMismatch { expected: reference.dimensions(), actual: rendered.dimensions() });
    }
    let n = rendered.as_raw().len().max(1) as f64;
    let sum: f64 = rendered
        .as_raw()
        .iter()
        .zip(reference.as_raw())
        .map(|(&a, &b)| {
            let d = (a as f64 - b as f64) / 255.0;
            d * d
        })
        .sum();
    Ok(Fidelity::from_mse(sum / n))
}

/// [`fidelity`] on unquantized rasters; alpha is ignored.
pub fn raster_fidelity(rendered: &Raster, reference: &Raster) -> Result<Fidelity> {
    if rendered.dimensions() != reference.dimensions() {
        return Err(Error::DimensionMismatch { expected: reference.dimensions(), actual: rendered.dimensions() });
    }
    let n = (rendered.data.len() * 3).max(1) as f64;
    let sum: f64 = rendered
        .data
        .iter()
        .zip(&reference.data)
        .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]) * (a[c] - b[c])))
        .sum();
    Ok(Fidelity::from_mse(sum / n))
}
