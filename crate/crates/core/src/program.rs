//! The stroke program: a replayable JSON record of every region and stroke
//! in paint order, plus the configuration that produced it.
//!
//! ```json
//! {
//!   "header": { "format": "brushpath-program", "version": 1, "input": "in.png",
//!               "width": 256, "height": 256, "config": { ... } },
//!   "groups":  [ { "id": 0, "segment_id": 0, "members": [3, 1], "centroid": [40.5, 12.0] } ],
//!   "regions": [ { "rank": 0, "group_id": 0, "id": 3, "source_segment_id": 0,
//!                  "fill": [255, 255, 255], "outline": [ { "kind": "line", "points": [[0, 0], [9, 0]] } ],
//!                  "centroid": [4.5, 4.5], "area": 81.0 } ],
//!   "strokes": [ { "rank": 0, "segment_id": 0, "group_id": 0, "region_id": 3,
//!                  "x": 4.5, "y": 4.5, "w": 9.0, "h": 9.0, "theta": 0.0, "r": 255, "g": 255, "b": 255 } ]
//! }
//! ```

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::sequencing::RegionGroup;
use crate::stroke_geometry::StrokeParams;
use crate::vectorization::VectorRegion;

pub const PROGRAM_FORMAT: &str = "brushpath-program";
pub const PROGRAM_VERSION: u32 = 1;
pub const REGIONS_FORMAT: &str = "brushpath-regions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramHeader {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub width: u32,
    pub height: u32,
    pub config: RunConfig,
}

impl ProgramHeader {
    pub fn new(input: Option<String>, width: u32, height: u32, config: RunConfig) -> Self {
        Self { format: PROGRAM_FORMAT.into(), version: PROGRAM_VERSION, input, width, height, config }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub rank: usize,
    pub group_id: usize,
    #[serde(flatten)]
    pub region: VectorRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeRecord {
    pub rank: usize,
    pub segment_id: usize,
    pub group_id: usize,
    pub region_id: usize,
    #[serde(flatten)]
    pub params: StrokeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeProgram {
    pub header: ProgramHeader,
    #[serde(default)]
    pub groups: Vec<RegionGroup>,
    pub regions: Vec<RegionRecord>,
    pub strokes: Vec<StrokeRecord>,
}

impl StrokeProgram {
    pub fn region(&self, id: usize) -> Option<&RegionRecord> {
        self.regions.iter().find(|r| r.region.id == id)
    }

    pub fn region_index(&self) -> HashMap<usize, &RegionRecord> {
        self.regions.iter().map(|r| (r.region.id, r)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.format != PROGRAM_FORMAT {
            return Err(Error::ProgramInvalid(format!("format is `{}`, expected `{PROGRAM_FORMAT}`", h.format)));
        }
        if h.version != PROGRAM_VERSION {
            return Err(Error::ProgramVersion { found: h.version, expected: PROGRAM_VERSION });
        }
        if h.width == 0 || h.height == 0 {
            return Err(Error::ProgramInvalid(format!("canvas {}x{} is empty", h.width, h.height)));
        }
        h.config.validate()?;
        let mut regions = HashMap::new();
        for r in &self.regions {
            if regions.insert(r.region.id, r).is_some() {
                return Err(Error::ProgramInvalid(format!("region {} appears twice", r.region.id)));
            }
            if !r.region.is_closed() {
                return Err(Error::ProgramInvalid(format!("region {} outline is not closed", r.region.id)));
            }
        }
        let mut last: Option<usize> = None;
        for s in &self.strokes {
            if last.is_some_and(|l| s.rank <= l) {
                return Err(Error::ProgramInvalid(format!("stroke rank {} follows rank {}", s.rank, last.unwrap())));
            }
            last = Some(s.rank);
            let region = regions
                .get(&s.region_id)
                .ok_or_else(|| Error::ProgramInvalid(format!("stroke {} references missing region {}", s.rank, s.region_id)))?;
            if region.region.source_segment_id != s.segment_id || region.group_id != s.group_id {
                return Err(Error::ProgramInvalid(format!(
                    "stroke {} tags segment {} group {} but region {} is in segment {} group {}",
                    s.rank, s.segment_id, s.group_id, s.region_id, region.region.source_segment_id, region.group_id
                )));
            }
            s.params
                .validate()
                .map_err(|e| Error::ProgramInvalid(format!("stroke {}: {e}", s.rank)))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("programs always serialize") + "\n"
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let program: Self = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        program.validate()?;
        Ok(program)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Vectorized regions before sequencing, as passed between the
/// `vectorize` and `sequence` stages. Shares the program's version number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub width: u32,
    pub height: u32,
    pub regions: Vec<VectorRegion>,
}

impl RegionFile {
    pub fn new(input: Option<String>, width: u32, height: u32, regions: Vec<VectorRegion>) -> Self {
        Self { format: REGIONS_FORMAT.into(), version: PROGRAM_VERSION, input, width, height, regions }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != REGIONS_FORMAT {
            return Err(Error::ProgramInvalid(format!("format is `{}`, expected `{REGIONS_FORMAT}`", self.format)));
        }
        if self.version != PROGRAM_VERSION {
            return Err(Error::ProgramVersion { found: self.version, expected: PROGRAM_VERSION });
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::ProgramInvalid(format!("canvas {}x{} is empty", self.width, self.height)));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if r.id != i {
                return Err(Error::ProgramInvalid(format!("region at position {i} has id {}", r.id)));
            }
            if !r.is_closed() {
                return Err(Error::ProgramInvalid(format!("region {} outline is not closed", r.id)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("region files always serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        file.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn parse_error(text: &str, e: &serde_json::Error) -> Error {
    let (line, column) = (e.line(), e.column());
    let offset = if line == 0 {
        0
    } else {
        let preceding: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
        (preceding + column.saturating_sub(1)).min(text.len())
    };
    Error::ProgramParse { offset, line, column, message: e.to_string() }
}
