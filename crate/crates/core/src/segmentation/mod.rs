//! Scene segmentation: split the input image into mutually disjoint
//! segments, ordered for painting.
//!
//! Masks come either from the built-in graph-based segmenter
//! ([`segment_image`]) or from an externally produced label map
//! ([`ingest_label_map`]). Both paths go through [`prepare_segments`], which
//! resolves overlaps (ascending area), sweeps unassigned pixels into a
//! residual background segment and sorts the result for painting
//! (residual first, then descending area).

mod builtin;
mod label_map;

use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::mask::Mask;

pub use builtin::segment_image;
pub use label_map::{export_label_map, ingest_label_map, read_label_map, write_label_map, LabelMap};

/// The raster being painted. Always at least 1×1.
#[derive(Debug, Clone, PartialEq)]
pub struct InputImage(RgbImage);

impl InputImage {
    pub fn new(pixels: RgbImage) -> Result<Self> {
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(Error::InvalidImage(format!("image must be at least 1x1, got {}x{}", pixels.width(), pixels.height())));
        }
        Ok(Self(pixels))
    }

    pub fn open(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::image(path, e))?;
        Self::new(img.to_rgb8())
    }

    pub fn width(&self) -> u32 {
        self.0.width()
    }

    pub fn height(&self) -> u32 {
        self.0.height()
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.0.dimensions()
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.0.get_pixel(x, y).0
    }

    pub fn as_rgb(&self) -> &RgbImage {
        &self.0
    }
}

/// One scene segment: a non-empty binary mask with its pixel count and
/// tight bounding box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMask {
    pub id: usize,
    mask: Mask,
    area: usize,
    bbox: BBox,
}

impl SegmentMask {
    /// Wraps a mask, computing area and tight bbox. Fails on an empty mask.
    pub fn from_mask(id: usize, mask: Mask) -> Result<Self> {
        let mask = mask.tightened().ok_or(Error::EmptyMask)?;
        let area = mask.count();
        let bbox = mask.window();
        Ok(Self { id, mask, area, bbox })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.mask.dimensions()
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.mask.get(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentationMethod {
    #[default]
    Builtin,
    LabelMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub method: SegmentationMethod,
    /// Coarse-to-fine control for the built-in segmenter; larger values
    /// yield smaller segments. Plays the role of the "points per side"
    /// setting of promptable mask generators (typically 2–8).
    pub granularity: u32,
    pub iou_threshold: f64,
    /// Segments smaller than this are merged into their largest neighbour.
    /// `None` picks `max(16, pixels / 2000)`.
    pub min_segment_area: Option<usize>,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self { method: SegmentationMethod::Builtin, granularity: 4, iou_threshold: 0.7, min_segment_area: None }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::Config(format!("segmentation.iou_threshold must be in [0, 1], got {}", self.iou_threshold)));
        }
        if self.granularity < 1 {
            return Err(Error::Config("segmentation.granularity must be >= 1".into()));
        }
        Ok(())
    }

    pub fn min_area_for(&self, pixels: usize) -> usize {
        self.min_segment_area.unwrap_or_else(|| (pixels / 2000).max(16))
    }
}

fn check_same_dims(a: (u32, u32), b: (u32, u32)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, actual: b });
    }
    Ok(())
}

/// Intersection over union of two masks.
pub fn compute_iou(a: &SegmentMask, b: &SegmentMask) -> Result<f64> {
    check_same_dims(a.dimensions(), b.dimensions())?;
    let inter = a.mask.intersection_count(&b.mask);
    let union = a.area + b.area - inter;
    Ok(inter as f64 / union as f64)
}

/// Makes masks pairwise disjoint.
///
/// Masks are visited in ascending area. When the current mask overlaps an
/// already accepted (smaller) one, the smaller is dropped if their IoU
/// exceeds the threshold; otherwise the shared pixels are removed from the
/// current mask. Masks emptied by subtraction disappear.
pub fn resolve_overlaps(masks: Vec<SegmentMask>, cfg: &SegmentationConfig) -> Result<Vec<SegmentMask>> {
    cfg.validate()?;
    if let Some(first) = masks.first() {
        for m in &masks[1..] {
            check_same_dims(first.dimensions(), m.dimensions())?;
        }
    }
    let mut queue = masks;
    queue.sort_by_key(|m| (m.area, m.bbox.y0, m.bbox.x0, m.id));

    let mut accepted: Vec<SegmentMask> = Vec::with_capacity(queue.len());
    for current in queue {
        accepted.retain(|smaller| {
            if smaller.bbox.intersect(&current.bbox).is_none() {
                return true;
            }
            let inter = smaller.mask.intersection_count(&current.mask);
            if inter == 0 {
                return true;
            }
            let iou = inter as f64 / (smaller.area + current.area - inter) as f64;
            iou <= cfg.iou_threshold
        });
        let mut remaining = current.mask.clone();
        for smaller in &accepted {
            if smaller.bbox.intersect(&current.bbox).is_some() {
                remaining.subtract(&smaller.mask);
            }
        }
        if let Ok(seg) = SegmentMask::from_mask(current.id, remaining) {
            accepted.push(seg);
        }
    }
    Ok(accepted)
}

/// Paint order: descending area, ties by bbox `(top, left)`, then id.
pub fn order_segments(mut masks: Vec<SegmentMask>) -> Vec<SegmentMask> {
    masks.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then(a.bbox.y0.cmp(&b.bbox.y0))
            .then(a.bbox.x0.cmp(&b.bbox.x0))
            .then(a.id.cmp(&b.id))
    });
    masks
}

/// Pixels covered by none of `masks`, as one segment. `None` when the masks
/// already cover the image.
pub fn residual_segment(masks: &[SegmentMask], width: u32, height: u32, id: usize) -> Option<SegmentMask> {
    let mut rest = Mask::full(width, height);
    for m in masks {
        rest.subtract(&m.mask);
    }
    SegmentMask::from_mask(id, rest).ok()
}

/// Overlap resolution, residual sweep and paint ordering. Ids of the
/// returned segments are their positions in paint order.
pub fn prepare_segments(raw: Vec<SegmentMask>, cfg: &SegmentationConfig, width: u32, height: u32) -> Result<Vec<SegmentMask>> {
    for m in &raw {
        check_same_dims((width, height), m.dimensions())?;
    }
    let resolved = resolve_overlaps(raw, cfg)?;
    let residual = residual_segment(&resolved, width, height, usize::MAX);
    let mut out: Vec<SegmentMask> = residual.into_iter().chain(order_segments(resolved)).collect();
    for (i, seg) in out.iter_mut().enumerate() {
        seg.id = i;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_mask(id: usize, w: u32, h: u32, r: BBox) -> SegmentMask {
        SegmentMask::from_mask(id, Mask::from_fn(w, h, r, |_, _| true)).unwrap()
    }

    fn bb(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox { x0, y0, x1, y1 }
    }

    #[test]
    fn iou_examples() {
        let a = rect_mask(0, 8, 8, bb(0, 0, 2, 2));
        assert_eq!(compute_iou(&a, &a).unwrap(), 1.0);
        let far = rect_mask(1, 8, 8, bb(5, 5, 7, 7));
        assert_eq!(compute_iou(&a, &far).unwrap(), 0.0);
        // Overlap in a 2×1 strip: |∩| = 2, |∪| = 6.
        let shifted = rect_mask(2, 8, 8, bb(1, 0, 3, 2));
        assert!((compute_iou(&a, &shifted).unwrap() - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn iou_dimension_mismatch() {
        let a = rect_mask(0, 8, 8, bb(0, 0, 2, 2));
        let b = rect_mask(1, 9, 8, bb(0, 0, 2, 2));
        assert!(matches!(compute_iou(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_mask_rejected() {
        let m = Mask::empty(4, 4, bb(0, 0, 4, 4));
        assert!(matches!(SegmentMask::from_mask(0, m), Err(Error::EmptyMask)));
    }

    #[test]
    fn disjoint_masks_unchanged() {
        let cfg = SegmentationConfig::default();
        let a = rect_mask(0, 16, 16, bb(0, 0, 4, 4));
        let b = rect_mask(1, 16, 16, bb(8, 8, 16, 16));
        let out = resolve_overlaps(vec![b.clone(), a.clone()], &cfg).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.contains(&a) && out.contains(&b));
    }

    #[test]
    fn nested_mask_punches_hole() {
        let cfg = SegmentationConfig { iou_threshold: 0.7, ..Default::default() };
        let large = rect_mask(0, 16, 16, bb(0, 0, 16, 16));
        let small = rect_mask(1, 16, 16, bb(4, 4, 8, 8));
        let out = resolve_overlaps(vec![large, small], &cfg).unwrap();
        assert_eq!(out.len(), 2);
        // Pixel-count oracle: hole of 16 in a 256 square.
        let total: usize = out.iter().map(|s| s.area()).sum();
        assert_eq!(total, 256);
        let big = out.iter().find(|s| s.id == 0).unwrap();
        assert_eq!(big.area(), 240);
        assert!(!big.contains(5, 5));
    }

    #[test]
    fn near_duplicates_collapse() {
        let cfg = SegmentationConfig { iou_threshold: 0.8, ..Default::default() };
        // 20×20 vs 20×19: IoU = 380/400 = 0.95.
        let a = rect_mask(0, 32, 32, bb(0, 0, 20, 20));
        let b = rect_mask(1, 32, 32, bb(0, 0, 20, 19));
        assert!((compute_iou(&a, &b).unwrap() - 0.95).abs() < 1e-12);
        let out = resolve_overlaps(vec![a, b], &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].area(), 400);
    }

    #[test]
    fn ordering_by_area_then_position() {
        let a = rect_mask(0, 64, 64, bb(0, 0, 10, 1));
        let b = rect_mask(1, 64, 64, bb(0, 10, 30, 20));
        let c = rect_mask(2, 64, 64, bb(0, 30, 42, 31));
        let order: Vec<usize> = order_segments(vec![a, b, c]).iter().map(|s| s.area()).collect();
        assert_eq!(order, vec![300, 42, 10]);

        let p = rect_mask(0, 64, 64, bb(20, 5, 24, 9));
        let q = rect_mask(1, 64, 64, bb(2, 5, 6, 9));
        let r = rect_mask(2, 64, 64, bb(40, 0, 44, 4));
        let ids: Vec<usize> = order_segments(vec![p.clone(), q.clone(), r.clone()]).iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![2, 1, 0]);
        let again: Vec<usize> = order_segments(vec![r, q, p]).iter().map(|s| s.id).collect();
        assert_eq!(ids, again);

        let single = rect_mask(7, 4, 4, bb(0, 0, 1, 1));
        assert_eq!(order_segments(vec![single.clone()]), vec![single]);
    }

    #[test]
    fn residual_goes_first() {
        let cfg = SegmentationConfig::default();
        let a = rect_mask(0, 10, 10, bb(0, 0, 10, 4));
        let out = prepare_segments(vec![a], &cfg, 10, 10).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].area(), 60);
        assert_eq!(out[1].area(), 40);
        assert_eq!(out.iter().map(|s| s.id).collect::<Vec<_>>(), vec![0, 1]);
    }
}
