//! Raster segment → filled vector regions.
//!
//! A segment is split into flat colour layers, each layer's 4-connected
//! components are traced along pixel edges, and the traced outlines are
//! fitted with lines and Bézier curves. One [`VectorRegion`] results per
//! component, carrying the layer colour as its fill.

mod curve;
mod fit;
mod quantize;
mod raster;
mod svg;
mod trace;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, Polygon};
use crate::mask::Mask;
use crate::segmentation::{InputImage, SegmentMask};

pub use curve::{cubic_point, flatten_path, quadratic_point, CurveKind, CurveSegment};
pub use fit::fit_curves;
pub use quantize::{quantize_segment_colors, ColorLayer};
pub use raster::rasterize_rings;
pub use svg::regions_to_svg;
pub use trace::{chamfer, trace_components, trace_contours, ComponentContours};

/// Chord tolerance used when rasterizing regions.
pub const RASTER_FLATTEN_TOLERANCE: f64 = 0.1;

/// Share of a component's pixels its fitted outline may gain or lose
/// before the fit is redone with a tighter tolerance.
pub const ROUNDTRIP_SLACK: f64 = 0.01;
const TOLERANCE_REFINEMENTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub colors_per_segment: usize,
    /// Maximum distance in pixels from any traced vertex to its fitted curve.
    pub fit_tolerance: f64,
    /// Turning angle in degrees above which a vertex splits the outline.
    pub corner_angle_threshold: f64,
    /// Chord tolerance in pixels when curves are turned back into polygons.
    pub flatten_tolerance: f64,
    /// Colour components smaller than this many pixels are absorbed by the
    /// neighbouring layer they share the most boundary with.
    pub min_region_area: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { colors_per_segment: 8, fit_tolerance: 1.0, corner_angle_threshold: 60.0, flatten_tolerance: 0.25, min_region_area: 8 }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("colors_per_segment", self.colors_per_segment as f64),
            ("fit_tolerance", self.fit_tolerance),
            ("corner_angle_threshold", self.corner_angle_threshold),
            ("flatten_tolerance", self.flatten_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("trace.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// A filled vector region ("Bézier patch"): a closed outline, optional hole
/// outlines and one fill colour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRegion {
    pub id: usize,
    pub source_segment_id: usize,
    pub fill: [u8; 3],
    pub outline: Vec<CurveSegment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holes: Vec<Vec<CurveSegment>>,
    pub centroid: Point,
    pub area: f64,
}

impl VectorRegion {
    pub fn curves(&self) -> impl Iterator<Item = &CurveSegment> {
        self.outline.iter().chain(self.holes.iter().flatten())
    }

    /// True when every outline's last end point meets its first start point.
    pub fn is_closed(&self) -> bool {
        std::iter::once(&self.outline).chain(&self.holes).all(|path| match (path.first(), path.last()) {
            (Some(a), Some(b)) => a.start().distance(b.end()) <= 1e-6,
            _ => false,
        })
    }
}

/// Adaptive flattening of every outline. The exterior ring comes from the
/// outline, holes from the hole outlines; vertex order is preserved.
pub fn flatten_to_polygon(region: &VectorRegion, tol: f64) -> Result<Polygon> {
    let exterior = flatten_path(&region.outline, tol);
    let holes = region.holes.iter().map(|h| flatten_path(h, tol)).filter(|h| h.len() >= 3).collect();
    Polygon::with_holes(exterior, holes)
}

pub fn rasterize_polygon(poly: &Polygon, width: u32, height: u32) -> Mask {
    let rings: Vec<&[Point]> = std::iter::once(poly.exterior.as_slice()).chain(poly.holes.iter().map(|h| h.as_slice())).collect();
    rasterize_rings(&rings, width, height)
}

/// Binary mask of a region (even-odd over outline and holes).
pub fn rasterize_region(region: &VectorRegion, width: u32, height: u32) -> Mask {
    let rings: Vec<Vec<Point>> = std::iter::once(&region.outline)
        .chain(&region.holes)
        .map(|p| flatten_path(p, RASTER_FLATTEN_TOLERANCE))
        .collect();
    let refs: Vec<&[Point]> = rings.iter().map(|r| r.as_slice()).collect();
    rasterize_rings(&refs, width, height)
}

/// Quantize → trace → fit for one segment. Regions are ordered by area,
/// largest first; `id` is the position in that order.
pub fn vectorize_segment(segment: &SegmentMask, image: &InputImage, cfg: &TraceConfig) -> Result<Vec<VectorRegion>> {
    cfg.validate()?;
    let layers = quantize_segment_colors(segment, image, cfg.colors_per_segment)?;
    let layers = absorb_specks(segment, layers, cfg.min_region_area);

    let mut regions = Vec::new();
    for layer in &layers {
        for comp in trace_components(&layer.mask) {
            let (w, h) = segment.dimensions();
            let (outline, holes) = fit_component(&comp, w, h, cfg)?;
            let mut region = VectorRegion {
                id: 0,
                source_segment_id: segment.id,
                fill: layer.color,
                outline,
                holes,
                centroid: Point::default(),
                area: 0.0,
            };
            let poly = flatten_to_polygon(&region, cfg.flatten_tolerance)?;
            region.area = poly.area();
            region.centroid = poly.centroid()?;
            regions.push(region);
        }
    }
    regions.sort_by(|a, b| {
        b.area
            .total_cmp(&a.area)
            .then(a.centroid.y.total_cmp(&b.centroid.y))
            .then(a.centroid.x.total_cmp(&b.centroid.x))
    });
    for (i, r) in regions.iter_mut().enumerate() {
        r.id = i;
    }
    Ok(regions)
}

/// Fits the outer ring and holes of one component. When the filled curves
/// would differ from the component by more than [`ROUNDTRIP_SLACK`] of its
/// pixels, the tolerance is halved and the fit repeated; the last resort is
/// the chamfered pixel boundary itself as straight lines.
fn fit_component(
    comp: &ComponentContours,
    width: u32,
    height: u32,
    cfg: &TraceConfig,
) -> Result<(Vec<CurveSegment>, Vec<Vec<CurveSegment>>)> {
    let rings: Vec<Vec<Point>> = std::iter::once(&comp.outer).chain(&comp.holes).map(|r| chamfer(r)).collect();
    let refs: Vec<&[Point]> = rings.iter().map(|r| r.as_slice()).collect();
    let exact = rasterize_rings(&refs, width, height);
    let budget = (exact.count() as f64 * ROUNDTRIP_SLACK).floor() as usize;

    let mut fit_cfg = cfg.clone();
    for _ in 0..TOLERANCE_REFINEMENTS {
        let paths = rings.iter().map(|r| fit_curves(r, &fit_cfg)).collect::<Result<Vec<_>>>()?;
        let flat: Vec<Vec<Point>> = paths.iter().map(|p| flatten_path(p, RASTER_FLATTEN_TOLERANCE)).collect();
        let flat_refs: Vec<&[Point]> = flat.iter().map(|r| r.as_slice()).collect();
        let got = rasterize_rings(&flat_refs, width, height);
        if exact.count() + got.count() - 2 * exact.intersection_count(&got) <= budget {
            return Ok(split_outline(paths));
        }
        fit_cfg.fit_tolerance /= 2.0;
    }
    let lines = rings
        .iter()
        .map(|r| (0..r.len()).map(|i| CurveSegment::line(r[i], r[(i + 1) % r.len()])).collect())
        .collect();
    Ok(split_outline(lines))
}

fn split_outline(mut paths: Vec<Vec<CurveSegment>>) -> (Vec<CurveSegment>, Vec<Vec<CurveSegment>>) {
    let outline = paths.remove(0);
    (outline, paths)
}

/// Reassigns 4-connected colour components below `min_area` pixels to the
/// neighbouring layer sharing the longest boundary with them.
fn absorb_specks(segment: &SegmentMask, layers: Vec<ColorLayer>, min_area: usize) -> Vec<ColorLayer> {
    if layers.len() <= 1 || min_area <= 1 {
        return layers;
    }
    let win = segment.bbox();
    let (ww, wh) = (win.width() as usize, win.height() as usize);
    const NONE: u16 = u16::MAX;
    let mut label = vec![NONE; ww * wh];
    for (li, layer) in layers.iter().enumerate() {
        for (x, y) in layer.mask.iter_set() {
            label[(y - win.y0) as usize * ww + (x - win.x0) as usize] = li as u16;
        }
    }
    let neighbours = |p: usize| {
        let (x, y) = (p % ww, p / ww);
        [
            (x > 0).then(|| p - 1),
            (x + 1 < ww).then(|| p + 1),
            (y > 0).then(|| p - ww),
            (y + 1 < wh).then(|| p + ww),
        ]
        .into_iter()
        .flatten()
    };

    for _pass in 0..8 {
        let mut changed = false;
        let mut seen = vec![false; ww * wh];
        for start in 0..ww * wh {
            if seen[start] || label[start] == NONE {
                continue;
            }
            let l = label[start];
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            let mut border = vec![0usize; layers.len()];
            while let Some(p) = queue.pop_front() {
                comp.push(p);
                for q in neighbours(p) {
                    let lq = label[q];
                    if lq == l {
                        if !seen[q] {
                            seen[q] = true;
                            queue.push_back(q);
                        }
                    } else if lq != NONE {
                        border[lq as usize] += 1;
                    }
                }
            }
            if comp.len() >= min_area {
                continue;
            }
            let best = (0..layers.len()).filter(|&i| border[i] > 0).max_by(|&a, &b| border[a].cmp(&border[b]).then(b.cmp(&a)));
            if let Some(target) = best {
                for p in comp {
                    label[p] = target as u16;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let (w, h) = segment.dimensions();
    layers
        .iter()
        .enumerate()
        .filter_map(|(li, layer)| {
            let mask = Mask::from_fn(w, h, win, |x, y| label[(y - win.y0) as usize * ww + (x - win.x0) as usize] == li as u16);
            let mask = mask.tightened()?;
            Some(ColorLayer { mask, color: layer.color })
        })
        .collect()
}
