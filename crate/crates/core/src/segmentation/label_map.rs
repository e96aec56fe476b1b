//! Label-map files: single-channel 16-bit lossless rasters where 0 means
//! unlabeled and every other value names one segment.

use std::collections::BTreeMap;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::mask::Mask;

use super::SegmentMask;

pub type LabelMap = ImageBuffer<Luma<u16>, Vec<u16>>;

/// One mask per distinct nonzero label, in ascending label order; the mask
/// id is its position in that order. Unlabeled pixels belong to no mask.
pub fn ingest_label_map(labels: &LabelMap, expected: (u32, u32)) -> Result<Vec<SegmentMask>> {
    let dims = labels.dimensions();
    if dims != expected {
        return Err(Error::DimensionMismatch { expected, actual: dims });
    }
    let (w, h) = dims;
    let mut boxes: BTreeMap<u16, BBox> = BTreeMap::new();
    for (x, y, Luma([l])) in labels.enumerate_pixels() {
        if *l == 0 {
            continue;
        }
        let px = BBox { x0: x, y0: y, x1: x + 1, y1: y + 1 };
        boxes.entry(*l).and_modify(|b| *b = b.union(&px)).or_insert(px);
    }
    if boxes.is_empty() {
        return Err(Error::NoSegments);
    }
    boxes
        .into_iter()
        .enumerate()
        .map(|(id, (label, bbox))| {
            let mask = Mask::from_fn(w, h, bbox, |x, y| labels.get_pixel(x, y).0[0] == label);
            SegmentMask::from_mask(id, mask)
        })
        .collect()
}

/// Writes segments as labels `1..=N` in slice order.
pub fn export_label_map(segments: &[SegmentMask], width: u32, height: u32) -> Result<LabelMap> {
    if segments.len() > u16::MAX as usize {
        return Err(Error::Config(format!("{} segments do not fit a 16-bit label map", segments.len())));
    }
    let mut map = LabelMap::new(width, height);
    for (i, seg) in segments.iter().enumerate() {
        if seg.dimensions() != (width, height) {
            return Err(Error::DimensionMismatch { expected: (width, height), actual: seg.dimensions() });
        }
        for (x, y) in seg.mask().iter_set() {
            map.put_pixel(x, y, Luma([i as u16 + 1]));
        }
    }
    Ok(map)
}

/// Reads a label map. 16-bit grayscale is the documented format; 8-bit
/// grayscale is accepted with its values taken verbatim.
pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    match img {
        DynamicImage::ImageLuma16(m) => Ok(m),
        DynamicImage::ImageLuma8(m) => {
            let (w, h) = m.dimensions();
            Ok(LabelMap::from_fn(w, h, |x, y| Luma([m.get_pixel(x, y).0[0] as u16])))
        }
        other => Err(Error::InvalidImage(format!(
            "{}: label map must be single-channel grayscale, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

pub fn write_label_map(path: &Path, map: &LabelMap) -> Result<()> {
    map.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::image(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{prepare_segments, SegmentationConfig};

    #[test]
    fn row_of_three() {
        let map = LabelMap::from_raw(3, 1, vec![1, 1, 2]).unwrap();
        let segs = ingest_label_map(&map, (3, 1)).unwrap();
        assert_eq!(segs.iter().map(|s| s.area()).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn single_label_covers_image() {
        let map = LabelMap::from_pixel(5, 4, Luma([5]));
        let segs = ingest_label_map(&map, (5, 4)).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].area(), 20);
    }

    #[test]
    fn half_unlabeled_becomes_residual() {
        let map = LabelMap::from_fn(8, 8, |x, _| Luma([if x < 4 { 0 } else { 1 }]));
        let segs = ingest_label_map(&map, (8, 8)).unwrap();
        assert_eq!(segs.len(), 1);
        // Histogram oracle.
        let zeros = map.pixels().filter(|p| p.0[0] == 0).count();
        let ones = map.pixels().filter(|p| p.0[0] == 1).count();
        let all = prepare_segments(segs, &SegmentationConfig::default(), 8, 8).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all.iter().map(|s| s.area()).collect::<Vec<_>>(), vec![zeros, ones]);
    }

    #[test]
    fn errors() {
        let map = LabelMap::new(4, 4);
        assert!(matches!(ingest_label_map(&map, (4, 4)), Err(Error::NoSegments)));
        let err = ingest_label_map(&map, (5, 4)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("5x4") && msg.contains("4x4"), "{msg}");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.png");
        let map = LabelMap::from_fn(7, 3, |x, y| Luma([(x * 1000 + y) as u16]));
        write_label_map(&path, &map).unwrap();
        assert_eq!(read_label_map(&path).unwrap(), map);
    }
}
