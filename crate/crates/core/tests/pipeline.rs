use std::collections::BTreeSet;

use brushpath::config::RunConfig;
use brushpath::pipeline;
use brushpath::program::StrokeProgram;
use brushpath::renderer::{BlendMode, FramePolicy};
use brushpath::segmentation::InputImage;
use image::{Rgb, RgbImage, Rgba, RgbaImage};

fn quadrants() -> InputImage {
    InputImage::new(RgbImage::from_fn(96, 64, |x, y| match (x < 48, y < 32) {
        (true, true) => Rgb([220, 40, 40]),
        (false, true) => Rgb([40, 160, 60]),
        (true, false) => Rgb([40, 60, 200]),
        (false, false) => Rgb([240, 230, 210]),
    }))
    .unwrap()
}

fn paint(cfg: &RunConfig) -> (pipeline::PaintRun, Vec<(usize, usize)>) {
    let mut frames = Vec::new();
    let run = pipeline::paint(&quadrants(), None, None, cfg, |f| {
        frames.push((f.index, f.rank));
        Ok(())
    })
    .unwrap();
    (run, frames)
}

#[test]
fn frame_policies_count_frames() {
    let mut cfg = RunConfig::default();
    cfg.render.frame_policy = FramePolicy::EveryStroke;
    let (run, frames) = paint(&cfg);
    let strokes = &run.program.strokes;
    assert_eq!(frames.len(), strokes.len());
    assert_eq!(frames.iter().map(|f| f.0).collect::<Vec<_>>(), (1..=strokes.len()).collect::<Vec<_>>());

    cfg.render.frame_policy = FramePolicy::EveryN(3);
    let (_, frames) = paint(&cfg);
    assert_eq!(frames.len(), strokes.len().div_ceil(3));

    cfg.render.frame_policy = FramePolicy::PerSegment;
    let (run, frames) = paint(&cfg);
    let segments: BTreeSet<usize> = run.program.strokes.iter().map(|s| s.segment_id).collect();
    assert_eq!(frames.len(), segments.len());
    assert_eq!(frames.last().unwrap().1, strokes.len() - 1);

    cfg.render.frame_policy = FramePolicy::PerRegion;
    let (run, frames) = paint(&cfg);
    let regions: BTreeSet<usize> = run.program.strokes.iter().map(|s| s.region_id).collect();
    assert_eq!(frames.len(), regions.len());
}

#[test]
fn flat_quadrants_are_reconstructed() {
    let (run, _) = paint(&RunConfig::default());
    assert_eq!(run.report.segments, 4);
    assert_eq!(run.report.regions, 4);
    let fid = run.report.fidelity.unwrap();
    assert!(fid.psnr >= 25.0, "{fid:?}");
    for s in &run.program.strokes {
        assert!(s.params.theta == 0.0 || s.params.theta == 90.0, "{:?}", s.params);
    }
}

#[test]
fn segments_are_painted_in_order() {
    let (run, _) = paint(&RunConfig::default());
    let order: Vec<usize> = run.program.strokes.iter().map(|s| s.segment_id).collect();
    assert!(order.windows(2).all(|w| w[0] <= w[1]), "{order:?}");
}

#[test]
fn saved_program_replays_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("program.json");
    let mut cfg = RunConfig::default();
    cfg.render.blend_mode = BlendMode::SourceOver;
    let (run, _) = paint(&cfg);
    run.program.save(&path).unwrap();
    let loaded = StrokeProgram::load(&path).unwrap();
    assert_eq!(loaded.header.config.render.blend_mode, BlendMode::SourceOver);
    let out = pipeline::render(&loaded, |_| Ok(())).unwrap();
    assert_eq!(out.image, run.output.image);
    assert_eq!(out.canvas.raster(), run.output.canvas.raster());
}

#[test]
fn seed_changes_only_the_brush() {
    let mut cfg = RunConfig::default();
    let (a, _) = paint(&cfg);
    cfg.seed = 7;
    let (b, _) = paint(&cfg);
    assert_eq!(a.program.strokes, b.program.strokes);
    assert_ne!(a.output.image, b.output.image);
}

#[test]
fn brush_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("brush.png");
    RgbaImage::from_fn(32, 16, |x, _| Rgba([255, 255, 255, if x % 2 == 0 { 255 } else { 128 }])).save(&path).unwrap();
    let mut cfg = RunConfig::default();
    cfg.render.brush = Some(path.clone());
    let (run, _) = paint(&cfg);
    assert!(run.report.strokes_applied > 0);

    std::fs::remove_file(&path).unwrap();
    let err = pipeline::render(&run.program, |_| Ok(())).unwrap_err();
    assert!(err.to_string().contains("brush.png"), "{err}");
}

#[test]
fn frame_errors_stop_rendering() {
    let err = pipeline::paint(&quadrants(), None, None, &RunConfig::default(), |_| {
        Err(brushpath::Error::Config("disk full".into()))
    })
    .err()
    .unwrap();
    assert!(err.to_string().contains("disk full"), "{err}");
}
