//! Region-driven stroke-based painting.
//!
//! An input image is split into disjoint segments, each segment is traced
//! into filled vector regions, the regions are put into a paint order, each
//! region becomes one or more rectangular brush strokes, and the strokes are
//! rendered one by one onto a blank canvas.
//!
//! [`pipeline::paint`] runs every stage; each stage is also usable alone.

pub mod config;
pub mod error;
pub mod geom;
pub mod mask;
pub mod pipeline;
pub mod program;
pub mod renderer;
pub mod segmentation;
pub mod sequencing;
pub mod stroke_geometry;
pub mod vectorization;

pub use config::RunConfig;
pub use error::{Error, Result};
