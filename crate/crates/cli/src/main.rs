use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use brushpath::config::RunConfig;
use brushpath::pipeline::{self, RunReport, StageTimings};
use brushpath::program::{RegionFile, StrokeProgram};
use brushpath::renderer::{self, BlendMode, Frame, FramePolicy, RenderOutput};
use brushpath::segmentation::{export_label_map, ingest_label_map, read_label_map, write_label_map, InputImage};
use brushpath::vectorization::regions_to_svg;
use clap::{Args, Parser, Subcommand};
use image::codecs::gif::{GifEncoder, Repeat};
use image::{Delay, DynamicImage, RgbImage};

const DEFAULT_OUT_DIR: &str = "out";

/// Paints an image region by region with brush strokes and records the
/// process as a replayable stroke program.
#[derive(Parser)]
#[command(name = "brushpath", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage: segment, vectorize, sequence and render.
    Paint {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        render: RenderArgs,
        /// Render a saved stroke program instead of analysing an image.
        #[arg(long, value_name = "PROGRAM", conflicts_with_all = ["input", "label_map"])]
        replay: Option<PathBuf>,
    },
    /// Write the segment label map (`segments.png`).
    Segment {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Write vectorized regions (`regions.json`, `regions.svg`).
    Vectorize {
        #[command(flatten)]
        input: InputArgs,
        /// Segment label map from the `segment` stage; segmentation runs
        /// when absent.
        #[arg(long, value_name = "PNG")]
        segments: Option<PathBuf>,
    },
    /// Turn `regions.json` into a stroke program (`program.json`).
    Sequence {
        #[arg(long, value_name = "JSON")]
        regions: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render a stroke program, optionally overriding its render settings.
    Render {
        #[arg(long, value_name = "JSON")]
        program: PathBuf,
        /// Reference image for the fidelity figures in the report.
        #[arg(long, value_name = "IMAGE")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Render a stroke program exactly as recorded.
    Replay {
        program: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        render: RenderArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "TOML")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long, value_name = "IMAGE")]
    input: Option<PathBuf>,
    /// 16-bit label map replacing the built-in segmenter (0 = unlabeled).
    #[arg(long, value_name = "PNG")]
    label_map: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RenderArgs {
    /// RGBA brush image; opaque images are read as ink on white.
    #[arg(long, value_name = "IMAGE")]
    brush: Option<PathBuf>,
    /// every-stroke, every-<k>, per-region, per-group, per-segment or auto.
    #[arg(long)]
    frame_policy: Option<FramePolicy>,
    /// paper or source-over.
    #[arg(long)]
    blend_mode: Option<BlendMode>,
    /// Also write `timelapse.gif`.
    #[arg(long)]
    timelapse: bool,
    /// Skip writing individual frame images.
    #[arg(long)]
    no_frames: bool,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Paint { input, render, replay: Some(program) } => {
            replay(&program, input.common.out_dir.as_ref(), &render)
        }
        Command::Paint { input, render, replay: None } => paint(&input, &render),
        Command::Segment { input } => segment(&input),
        Command::Vectorize { input, segments } => vectorize(&input, segments.as_deref()),
        Command::Sequence { regions, common } => sequence(&regions, &common),
        Command::Render { program, input, out_dir, render } => {
            render_program(&program, input.as_deref(), out_dir, &render)
        }
        Command::Replay { program, out_dir, render } => replay(&program, out_dir.as_ref(), &render),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &common.out_dir {
        cfg.output_dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_render_args(cfg: &mut RunConfig, args: &RenderArgs) {
    if let Some(brush) = &args.brush {
        cfg.render.brush = Some(brush.clone());
    }
    if let Some(policy) = args.frame_policy {
        cfg.render.frame_policy = policy;
    }
    if let Some(mode) = args.blend_mode {
        cfg.render.blend_mode = mode;
    }
    if args.timelapse {
        cfg.render.timelapse = true;
    }
    if args.no_frames {
        cfg.render.write_frames = false;
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn read_input(args: &InputArgs) -> Result<(InputImage, String)> {
    let Some(path) = &args.input else { bail!("--input is required") };
    let image = InputImage::open(path).with_context(|| format!("reading input image {}", path.display()))?;
    Ok((image, path.display().to_string()))
}

fn read_labels(args: &InputArgs) -> Result<Option<brushpath::segmentation::LabelMap>> {
    args.label_map
        .as_ref()
        .map(|p| read_label_map(p).with_context(|| format!("reading label map {}", p.display())))
        .transpose()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(report)?)
}

/// Writes frames and the time-lapse as they arrive.
struct FrameSink {
    frames_dir: Option<PathBuf>,
    gif: Option<GifEncoder<BufWriter<File>>>,
    delay: Delay,
}

impl FrameSink {
    fn new(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        let frames_dir = if cfg.render.write_frames {
            let d = dir.join("frames");
            fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
            Some(d)
        } else {
            None
        };
        let gif = if cfg.render.timelapse {
            let path = dir.join("timelapse.gif");
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut enc = GifEncoder::new_with_speed(BufWriter::new(file), 10);
            enc.set_repeat(Repeat::Infinite)?;
            Some(enc)
        } else {
            None
        };
        Ok(Self { frames_dir, gif, delay: Delay::from_numer_denom_ms(cfg.render.timelapse_delay_ms, 1) })
    }

    fn push(&mut self, frame: Frame) -> brushpath::Result<()> {
        if let Some(d) = &self.frames_dir {
            let path = d.join(format!("frame_{:06}.png", frame.index));
            frame.image.save(&path).map_err(|e| brushpath::Error::Config(format!("writing {}: {e}", path.display())))?;
        }
        if let Some(gif) = &mut self.gif {
            let rgba = DynamicImage::ImageRgb8(frame.image).into_rgba8();
            gif.encode_frame(image::Frame::from_parts(rgba, 0, 0, self.delay))
                .map_err(|e| brushpath::Error::Config(format!("writing timelapse.gif: {e}")))?;
        }
        Ok(())
    }
}

fn write_final(dir: &Path, image: &RgbImage) -> Result<()> {
    let path = dir.join("final.png");
    image.save(&path).with_context(|| format!("writing {}", path.display()))
}

fn paint(args: &InputArgs, render: &RenderArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    apply_render_args(&mut cfg, render);
    let (image, name) = read_input(args)?;
    let labels = read_labels(args)?;
    let dir = out_dir(&cfg)?;
    let mut sink = FrameSink::new(&dir, &cfg)?;

    let run = pipeline::paint(&image, labels.as_ref(), Some(name), &cfg, |f| sink.push(f))?;
    drop(sink);

    let (w, h) = image.dimensions();
    let labels_out = dir.join("segments.png");
    write_label_map(&labels_out, &export_label_map(&run.segments, w, h)?)?;
    let regions: Vec<_> = run.program.regions.iter().map(|r| r.region.clone()).collect();
    fs::write(dir.join("regions.svg"), regions_to_svg(&regions, w, h)).context("writing regions.svg")?;
    write_text(&dir.join("program.json"), &run.program.to_json())?;
    write_final(&dir, &run.output.image)?;
    write_report(&dir.join("report.json"), &run.report)?;
    summarize(&run.report, &dir);
    Ok(())
}

fn segment(args: &InputArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let (image, _) = read_input(args)?;
    let labels = read_labels(args)?;
    let segments = pipeline::segment(&image, labels.as_ref(), &cfg)?;
    let (w, h) = image.dimensions();
    let path = out_dir(&cfg)?.join("segments.png");
    write_label_map(&path, &export_label_map(&segments, w, h)?)?;
    log::info!("{} segments -> {}", segments.len(), path.display());
    Ok(())
}

fn vectorize(args: &InputArgs, segments_file: Option<&Path>) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let (image, name) = read_input(args)?;
    let segments = match segments_file {
        // Labels 1..N of a `segment` output are already in paint order.
        Some(p) => {
            let map = read_label_map(p).with_context(|| format!("reading segments {}", p.display()))?;
            ingest_label_map(&map, image.dimensions()).with_context(|| format!("ingesting segments {}", p.display()))?
        }
        None => pipeline::segment(&image, read_labels(args)?.as_ref(), &cfg)?,
    };
    let regions = pipeline::vectorize(&segments, &image, &cfg)?;
    let (w, h) = image.dimensions();
    let dir = out_dir(&cfg)?;
    fs::write(dir.join("regions.svg"), regions_to_svg(&regions, w, h)).context("writing regions.svg")?;
    let count = regions.len();
    write_text(&dir.join("regions.json"), &RegionFile::new(Some(name), w, h, regions).to_json())?;
    log::info!("{count} regions from {} segments -> {}", segments.len(), dir.display());
    Ok(())
}

fn sequence(regions: &Path, common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    let file = RegionFile::load(regions).with_context(|| format!("reading regions {}", regions.display()))?;
    let program = pipeline::build_program(file.regions, file.width, file.height, file.input, &cfg)?;
    let path = out_dir(&cfg)?.join("program.json");
    write_text(&path, &program.to_json())?;
    log::info!("{} strokes in {} groups -> {}", program.strokes.len(), program.groups.len(), path.display());
    Ok(())
}

fn load_program(path: &Path) -> Result<StrokeProgram> {
    StrokeProgram::load(path).with_context(|| format!("reading stroke program {}", path.display()))
}

fn render_program(path: &Path, reference: Option<&Path>, out: Option<PathBuf>, args: &RenderArgs) -> Result<()> {
    let mut program = load_program(path)?;
    apply_render_args(&mut program.header.config, args);
    if out.is_some() {
        program.header.config.output_dir = out;
    }
    program.validate()?;
    let reference = reference
        .map(|p| InputImage::open(p).with_context(|| format!("reading input image {}", p.display())))
        .transpose()?;
    let dir = out_dir(&program.header.config)?;
    finish_render(&program, reference.as_ref(), &dir)
}

fn replay(path: &Path, out: Option<&PathBuf>, args: &RenderArgs) -> Result<()> {
    // Output options only; anything that changes pixels is rejected.
    if args.brush.is_some() || args.blend_mode.is_some() {
        bail!("replay renders the program exactly as recorded; use `render` to change the brush or blend mode");
    }
    let mut program = load_program(path)?;
    apply_render_args(&mut program.header.config, args);
    if let Some(dir) = out {
        program.header.config.output_dir = Some(dir.clone());
    }
    let dir = out_dir(&program.header.config)?;
    finish_render(&program, None, &dir)
}

fn finish_render(program: &StrokeProgram, reference: Option<&InputImage>, dir: &Path) -> Result<()> {
    let cfg = &program.header.config;
    let mut sink = FrameSink::new(dir, cfg)?;
    let start = Instant::now();
    let output = pipeline::render(program, |f| sink.push(f))?;
    drop(sink);
    let render_ms = start.elapsed().as_secs_f64() * 1e3;
    write_final(dir, &output.image)?;
    let report = render_report(program, &output, reference, render_ms)?;
    write_report(&dir.join("report.json"), &report)?;
    summarize(&report, dir);
    Ok(())
}

fn render_report(
    program: &StrokeProgram,
    output: &RenderOutput,
    reference: Option<&InputImage>,
    render_ms: f64,
) -> Result<RunReport> {
    let mut segments: Vec<usize> = program.regions.iter().map(|r| r.region.source_segment_id).collect();
    segments.sort_unstable();
    segments.dedup();
    Ok(RunReport {
        width: program.header.width,
        height: program.header.height,
        segments: segments.len(),
        regions: program.regions.len(),
        groups: program.groups.len(),
        strokes: program.strokes.len(),
        strokes_applied: output.strokes_applied,
        frames: output.frames,
        fidelity: reference.map(|r| renderer::fidelity(&output.image, r.as_rgb())).transpose()?,
        timings_ms: StageTimings { render_ms, ..StageTimings::default() },
        warnings: output.warnings.clone(),
    })
}

fn summarize(report: &RunReport, dir: &Path) {
    let fidelity = report.fidelity.map(|f| format!(", PSNR {:.2} dB", f.psnr)).unwrap_or_default();
    log::info!(
        "{} segments, {} regions, {} strokes, {} frames{fidelity} -> {}",
        report.segments,
        report.regions,
        report.strokes,
        report.frames,
        dir.display()
    );
}
