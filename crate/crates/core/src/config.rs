//! Run configuration, read from TOML. Every section and key is optional;
//! unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [segmentation]
//! granularity = 4.0
//!
//! [render]
//! blend_mode = "source-over"
//! frame_policy = "every-10"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renderer::{BlendMode, FramePolicy};
use crate::segmentation::SegmentationConfig;
use crate::sequencing::SequencingConfig;
use crate::stroke_geometry::DecompositionConfig;
use crate::vectorization::TraceConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub blend_mode: BlendMode,
    pub frame_policy: FramePolicy,
    /// RGBA brush image; the procedural brush is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brush: Option<PathBuf>,
    pub write_frames: bool,
    pub timelapse: bool,
    pub timelapse_delay_ms: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            blend_mode: BlendMode::Paper,
            frame_policy: FramePolicy::Auto,
            brush: None,
            write_frames: true,
            timelapse: false,
            timelapse_delay_ms: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the procedural brush.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub segmentation: SegmentationConfig,
    pub trace: TraceConfig,
    pub sequencing: SequencingConfig,
    pub decomposition: DecompositionConfig,
    pub render: RenderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: None,
            segmentation: SegmentationConfig::default(),
            trace: TraceConfig::default(),
            sequencing: SequencingConfig::default(),
            decomposition: DecompositionConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.segmentation.validate()?;
        self.trace.validate()?;
        self.sequencing.validate()?;
        self.decomposition.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections() {
        let cfg = RunConfig::from_toml(
            "seed = 9\n[render]\nblend_mode = \"source-over\"\nframe_policy = \"every-3\"\n[sequencing]\nlinkage = \"single\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.render.blend_mode, BlendMode::SourceOver);
        assert_eq!(cfg.render.frame_policy, FramePolicy::EveryN(3));
        assert_eq!(cfg.sequencing.linkage, crate::sequencing::Linkage::Single);
        assert_eq!(cfg.trace, TraceConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("colour = 3").is_err());
        assert!(RunConfig::from_toml("[trace]\nfit_tolerence = 1.0").is_err());
        assert!(RunConfig::from_toml("[render]\nframe_policy = \"often\"").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[trace]\nfit_tolerance = -1.0").is_err());
        assert!(RunConfig::from_toml("[decomposition]\np_group = 0").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.decomposition.delta = Some(250.0);
        cfg.render.brush = Some("brush.png".into());
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
