//! Flat colour layers for tracing.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::segmentation::{InputImage, SegmentMask};

/// Pixels of one segment that share a quantized colour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorLayer {
    pub mask: Mask,
    pub color: [u8; 3],
}

const MAX_ITERATIONS: usize = 32;

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn to_f(c: [u8; 3]) -> [f64; 3] {
    [c[0] as f64, c[1] as f64, c[2] as f64]
}

/// Splits a segment into at most `k` colour layers.
///
/// When the segment holds at most `k` distinct colours each becomes its own
/// layer. Otherwise k-means runs on the colour histogram, seeded with the
/// most frequent colour and grown by farthest-point selection, so results
/// are deterministic. Layer colour is the rounded mean of its pixels.
/// Layers are ordered by pixel count, largest first.
pub fn quantize_segment_colors(segment: &SegmentMask, image: &InputImage, k: usize) -> Result<Vec<ColorLayer>> {
    if k == 0 {
        return Err(Error::Config("colors_per_segment must be >= 1".into()));
    }
    if segment.dimensions() != image.dimensions() {
        return Err(Error::DimensionMismatch { expected: image.dimensions(), actual: segment.dimensions() });
    }
    let mut histogram: BTreeMap<[u8; 3], usize> = BTreeMap::new();
    for (x, y) in segment.mask().iter_set() {
        *histogram.entry(image.pixel(x, y)).or_default() += 1;
    }
    let colors: Vec<([u8; 3], usize)> = histogram.into_iter().collect();
    let assignment = if colors.len() <= k { (0..colors.len()).collect() } else { kmeans(&colors, k) };

    let clusters = assignment.iter().copied().max().map_or(0, |m| m + 1);
    let mut sums = vec![([0.0f64; 3], 0usize); clusters];
    for (&(c, n), &a) in colors.iter().zip(&assignment) {
        let f = to_f(c);
        for ch in 0..3 {
            sums[a].0[ch] += f[ch] * n as f64;
        }
        sums[a].1 += n;
    }
    let mut cluster_of: BTreeMap<[u8; 3], usize> = BTreeMap::new();
    for (&(c, _), &a) in colors.iter().zip(&assignment) {
        cluster_of.insert(c, a);
    }

    let (w, h) = image.dimensions();
    let bbox = segment.bbox();
    let mut layers: Vec<(usize, ColorLayer)> = sums
        .iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(i, (s, n))| {
            let color = s.map(|v| (v / *n as f64).round().clamp(0.0, 255.0) as u8);
            let mask = Mask::from_fn(w, h, bbox, |x, y| segment.contains(x, y) && cluster_of[&image.pixel(x, y)] == i);
            (*n, ColorLayer { mask, color })
        })
        .collect();
    layers.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.color.cmp(&b.1.color)));
    Ok(layers.into_iter().map(|(_, l)| l).collect())
}

fn kmeans(colors: &[([u8; 3], usize)], k: usize) -> Vec<usize> {
    let pts: Vec<[f64; 3]> = colors.iter().map(|(c, _)| to_f(*c)).collect();
    let weights: Vec<f64> = colors.iter().map(|(_, n)| *n as f64).collect();

    let first = (0..pts.len()).max_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(b.cmp(&a))).unwrap();
    let mut centers = vec![pts[first]];
    let mut nearest: Vec<f64> = pts.iter().map(|p| dist2(*p, pts[first])).collect();
    while centers.len() < k {
        let far = (0..pts.len()).max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a))).unwrap();
        if nearest[far] == 0.0 {
            break;
        }
        centers.push(pts[far]);
        for (i, p) in pts.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(*p, pts[far]));
        }
    }

    let assign = |centers: &[[f64; 3]]| -> Vec<usize> {
        pts.iter()
            .map(|p| {
                (0..centers.len())
                    .min_by(|&a, &b| dist2(*p, centers[a]).total_cmp(&dist2(*p, centers[b])).then(a.cmp(&b)))
                    .unwrap()
            })
            .collect()
    };
    let mut assignment = assign(&centers);
    for _ in 0..MAX_ITERATIONS {
        let mut acc = vec![([0.0; 3], 0.0); centers.len()];
        for (i, &a) in assignment.iter().enumerate() {
            for ch in 0..3 {
                acc[a].0[ch] += pts[i][ch] * weights[i];
            }
            acc[a].1 += weights[i];
        }
        for (c, (s, wsum)) in centers.iter_mut().zip(&acc) {
            if *wsum > 0.0 {
                *c = s.map(|v| v / wsum);
            }
        }
        let next = assign(&centers);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    // Compact away clusters that ended up empty.
    let mut remap = vec![usize::MAX; centers.len()];
    let mut n = 0;
    for a in assignment.iter_mut() {
        if remap[*a] == usize::MAX {
            remap[*a] = n;
            n += 1;
        }
        *a = remap[*a];
    }
    assignment
}
