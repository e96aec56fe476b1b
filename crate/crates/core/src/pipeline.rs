//! Stage functions tying the modules together, and the run report.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::program::{ProgramHeader, RegionRecord, StrokeProgram, StrokeRecord};
use crate::renderer::{self, BrushTemplate, Fidelity, Frame, RenderOutput};
use crate::segmentation::{
    ingest_label_map, prepare_segments, segment_image, InputImage, LabelMap, SegmentMask, SegmentationMethod,
};
use crate::sequencing::sequence_regions;
use crate::stroke_geometry::strokes_for_region;
use crate::vectorization::{flatten_to_polygon, vectorize_segment, VectorRegion};

/// Disjoint segments in paint order. A label map, when given, replaces the
/// built-in segmenter.
pub fn segment(image: &InputImage, label_map: Option<&LabelMap>, cfg: &RunConfig) -> Result<Vec<SegmentMask>> {
    let (w, h) = image.dimensions();
    let raw = match (label_map, cfg.segmentation.method) {
        (Some(labels), _) => ingest_label_map(labels, (w, h)),
        (None, SegmentationMethod::LabelMap) => {
            Err(Error::Config("segmentation.method is `label-map` but no label map was supplied".into()))
        }
        (None, SegmentationMethod::Builtin) => segment_image(image, &cfg.segmentation),
    };
    raw.and_then(|raw| prepare_segments(raw, &cfg.segmentation, w, h))
        .map_err(|e| e.in_stage("segment", None))
}

/// Vector regions of every segment, segment by segment. Region ids are
/// renumbered to be unique across the image.
pub fn vectorize(segments: &[SegmentMask], image: &InputImage, cfg: &RunConfig) -> Result<Vec<VectorRegion>> {
    let per_segment = segments
        .par_iter()
        .map(|s| vectorize_segment(s, image, &cfg.trace).map_err(|e| e.in_stage("vectorize", Some(format!("segment {}", s.id)))))
        .collect::<Result<Vec<_>>>()?;
    let mut regions: Vec<VectorRegion> = per_segment.into_iter().flatten().collect();
    for (i, r) in regions.iter_mut().enumerate() {
        r.id = i;
    }
    Ok(regions)
}

/// Sequences the regions and turns each into strokes.
pub fn build_program(
    regions: Vec<VectorRegion>,
    width: u32,
    height: u32,
    input: Option<String>,
    cfg: &RunConfig,
) -> Result<StrokeProgram> {
    cfg.validate()?;
    let sequence = sequence_regions(regions, &cfg.sequencing.resolved_for(width, height));
    let decomposition = cfg.decomposition.resolve(width, height);
    let per_region = sequence
        .regions
        .par_iter()
        .map(|s| {
            let poly = flatten_to_polygon(&s.region, cfg.trace.flatten_tolerance)?;
            strokes_for_region(&poly, s.region.fill, &decomposition)
        })
        .collect::<Vec<_>>();

    let mut strokes = Vec::new();
    let mut records = Vec::with_capacity(sequence.regions.len());
    for (s, params) in sequence.regions.into_iter().zip(per_region) {
        let params = params.map_err(|e| e.in_stage("strokes", Some(format!("region {}", s.region.id))))?;
        for p in params {
            strokes.push(StrokeRecord {
                rank: strokes.len(),
                segment_id: s.region.source_segment_id,
                group_id: s.group_id,
                region_id: s.region.id,
                params: p,
            });
        }
        records.push(RegionRecord { rank: s.rank, group_id: s.group_id, region: s.region });
    }
    Ok(StrokeProgram {
        header: ProgramHeader::new(input, width, height, cfg.clone()),
        groups: sequence.groups,
        regions: records,
        strokes,
    })
}

/// The brush named by the configuration, or the procedural brush seeded by
/// `cfg.seed`.
pub fn load_brush(cfg: &RunConfig) -> Result<BrushTemplate> {
    match &cfg.render.brush {
        Some(path) => BrushTemplate::open(path),
        None => Ok(BrushTemplate::procedural(cfg.seed)),
    }
}

/// Renders with the settings recorded in the program header.
pub fn render(program: &StrokeProgram, on_frame: impl FnMut(Frame) -> Result<()>) -> Result<RenderOutput> {
    let cfg = &program.header.config;
    let brush = load_brush(cfg).map_err(|e| e.in_stage("render", Some("brush".into())))?;
    renderer::render_sequence(program, &brush, cfg.render.blend_mode, cfg.render.frame_policy, on_frame)
        .map_err(|e| e.in_stage("render", None))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub segment_ms: f64,
    pub vectorize_ms: f64,
    pub sequence_ms: f64,
    pub render_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub width: u32,
    pub height: u32,
    pub segments: usize,
    pub regions: usize,
    pub groups: usize,
    pub strokes: usize,
    pub strokes_applied: usize,
    pub frames: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<Fidelity>,
    pub timings_ms: StageTimings,
    pub warnings: Vec<String>,
}

/// Everything a full run produces.
pub struct PaintRun {
    pub segments: Vec<SegmentMask>,
    pub program: StrokeProgram,
    pub output: RenderOutput,
    pub report: RunReport,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Segment → vectorize → sequence → render.
pub fn paint(
    image: &InputImage,
    label_map: Option<&LabelMap>,
    input: Option<String>,
    cfg: &RunConfig,
    on_frame: impl FnMut(Frame) -> Result<()>,
) -> Result<PaintRun> {
    cfg.validate()?;
    let (w, h) = image.dimensions();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let segments = segment(image, label_map, cfg)?;
    timings.segment_ms = ms(t);

    let t = Instant::now();
    let regions = vectorize(&segments, image, cfg)?;
    timings.vectorize_ms = ms(t);

    let t = Instant::now();
    let program = build_program(regions, w, h, input, cfg)?;
    timings.sequence_ms = ms(t);

    let t = Instant::now();
    let output = render(&program, on_frame)?;
    timings.render_ms = ms(t);

    let report = RunReport {
        width: w,
        height: h,
        segments: segments.len(),
        regions: program.regions.len(),
        groups: program.groups.len(),
        strokes: program.strokes.len(),
        strokes_applied: output.strokes_applied,
        frames: output.frames,
        fidelity: Some(renderer::fidelity(&output.image, image.as_rgb())?),
        timings_ms: timings,
        warnings: output.warnings.clone(),
    };
    Ok(PaintRun { segments, program, output, report })
}
