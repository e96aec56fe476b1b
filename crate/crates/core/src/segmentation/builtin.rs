//! Graph-based region merging over an 8-connected pixel grid.
//!
//! Edge weights are Euclidean RGB distances. Edges are processed in
//! ascending weight; two components merge when the edge weight does not
//! exceed either component's internal variation plus `k / |C|`. The scale
//! `k` shrinks as granularity grows. Small components are then folded into
//! their largest neighbour.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::geom::BBox;
use crate::mask::Mask;

use super::{InputImage, SegmentMask, SegmentationConfig};

const MERGE_SCALE: f64 = 2400.0;

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
    internal: Vec<f64>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), size: vec![1; n], internal: vec![0.0; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32, weight: f64) -> u32 {
        let (big, small) = if self.size[a as usize] >= self.size[b as usize] { (a, b) } else { (b, a) };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.internal[big as usize] = weight.max(self.internal[big as usize]).max(self.internal[small as usize]);
        big
    }
}

fn color_dist2(a: [u8; 3], b: [u8; 3]) -> u32 {
    a.iter().zip(b.iter()).map(|(&p, &q)| (p as i32 - q as i32).pow(2) as u32).sum()
}

/// Built-in unsupervised segmentation. Returns a partition of the image
/// (every pixel in exactly one mask), ids in raster order of first pixel.
pub fn segment_image(image: &InputImage, cfg: &SegmentationConfig) -> Result<Vec<SegmentMask>> {
    cfg.validate()?;
    let (w, h) = image.dimensions();
    let n = w as usize * h as usize;
    if n == 1 {
        return Ok(vec![SegmentMask::from_mask(0, Mask::full(w, h))?]);
    }

    let idx = |x: u32, y: u32| y * w + x;
    let mut edges: Vec<(u32, u32, u32)> = Vec::with_capacity(n * 4);
    for y in 0..h {
        for x in 0..w {
            let c = image.pixel(x, y);
            let mut push = |nx: u32, ny: u32| edges.push((color_dist2(c, image.pixel(nx, ny)), idx(x, y), idx(nx, ny)));
            if x + 1 < w {
                push(x + 1, y);
            }
            if y + 1 < h {
                push(x, y + 1);
                if x + 1 < w {
                    push(x + 1, y + 1);
                }
                if x > 0 {
                    push(x - 1, y + 1);
                }
            }
        }
    }
    edges.sort_unstable();

    let k = MERGE_SCALE / cfg.granularity as f64;
    let mut ds = DisjointSet::new(n);
    for &(d2, a, b) in &edges {
        let (ra, rb) = (ds.find(a), ds.find(b));
        if ra == rb {
            continue;
        }
        let weight = (d2 as f64).sqrt();
        let ta = ds.internal[ra as usize] + k / ds.size[ra as usize] as f64;
        let tb = ds.internal[rb as usize] + k / ds.size[rb as usize] as f64;
        if weight <= ta.min(tb) {
            ds.union(ra, rb, weight);
        }
    }

    // Compact labels in raster order of first occurrence.
    let mut label_of_root = vec![u32::MAX; n];
    let mut labels = vec![0u32; n];
    let mut count = 0u32;
    for p in 0..n as u32 {
        let r = ds.find(p) as usize;
        if label_of_root[r] == u32::MAX {
            label_of_root[r] = count;
            count += 1;
        }
        labels[p as usize] = label_of_root[r];
    }

    let labels = merge_small(labels, count as usize, w, h, cfg.min_area_for(n));
    masks_from_labels(&labels, w, h)
}

/// Folds every component smaller than `min_area` into the adjacent
/// component with the largest area (ties: lower label).
fn merge_small(mut labels: Vec<u32>, count: usize, w: u32, h: u32, min_area: usize) -> Vec<u32> {
    let mut area = vec![0usize; count];
    for &l in &labels {
        area[l as usize] += 1;
    }
    if count <= 1 || area.iter().all(|&a| a >= min_area) {
        return labels;
    }
    let mut neighbours: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); count];
    for y in 0..h {
        for x in 0..w {
            let a = labels[(y * w + x) as usize];
            let mut link = |nx: u32, ny: u32| {
                let b = labels[(ny * w + nx) as usize];
                if a != b {
                    neighbours[a as usize].insert(b);
                    neighbours[b as usize].insert(a);
                }
            };
            if x + 1 < w {
                link(x + 1, y);
            }
            if y + 1 < h {
                link(x, y + 1);
                if x + 1 < w {
                    link(x + 1, y + 1);
                }
                if x > 0 {
                    link(x - 1, y + 1);
                }
            }
        }
    }

    let mut parent: Vec<u32> = (0..count as u32).collect();
    fn root(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }

    loop {
        let mut small: Vec<u32> = (0..count as u32)
            .filter(|&l| parent[l as usize] == l && area[l as usize] < min_area)
            .collect();
        if small.is_empty() {
            break;
        }
        small.sort_by_key(|&l| (area[l as usize], l));
        let mut merged_any = false;
        for l in small {
            if parent[l as usize] != l || area[l as usize] >= min_area {
                continue;
            }
            let candidates: BTreeSet<u32> = std::mem::take(&mut neighbours[l as usize])
                .into_iter()
                .map(|nb| root(&mut parent, nb))
                .filter(|&nb| nb != l)
                .collect();
            let Some(&target) = candidates.iter().max_by(|&&a, &&b| area[a as usize].cmp(&area[b as usize]).then(b.cmp(&a))) else {
                neighbours[l as usize] = candidates;
                continue;
            };
            parent[l as usize] = target;
            area[target as usize] += area[l as usize];
            let mut moved = candidates;
            moved.remove(&target);
            let tgt = &mut neighbours[target as usize];
            tgt.remove(&l);
            tgt.extend(moved);
            merged_any = true;
        }
        if !merged_any {
            break;
        }
    }

    let mut remap = vec![u32::MAX; count];
    let mut next = 0u32;
    for l in labels.iter_mut() {
        let r = root(&mut parent, *l) as usize;
        if remap[r] == u32::MAX {
            remap[r] = next;
            next += 1;
        }
        *l = remap[r];
    }
    labels
}

fn masks_from_labels(labels: &[u32], w: u32, h: u32) -> Result<Vec<SegmentMask>> {
    let count = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut boxes: Vec<Option<BBox>> = vec![None; count];
    for y in 0..h {
        for x in 0..w {
            let l = labels[(y * w + x) as usize] as usize;
            let px = BBox { x0: x, y0: y, x1: x + 1, y1: y + 1 };
            boxes[l] = Some(boxes[l].map_or(px, |b| b.union(&px)));
        }
    }
    boxes
        .into_iter()
        .enumerate()
        .map(|(l, b)| {
            let b = b.expect("every compact label has at least one pixel");
            let mask = Mask::from_fn(w, h, b, |x, y| labels[(y * w + x) as usize] as usize == l);
            SegmentMask::from_mask(l, mask)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    fn solid(w: u32, h: u32, c: [u8; 3]) -> InputImage {
        InputImage::new(RgbImage::from_pixel(w, h, Rgb(c))).unwrap()
    }

    fn halves() -> InputImage {
        InputImage::new(RgbImage::from_fn(64, 64, |x, _| if x < 32 { Rgb([200, 30, 30]) } else { Rgb([20, 60, 220]) })).unwrap()
    }

    /// Flood fill over exact colour equality, 8-connected.
    fn exact_components(img: &InputImage) -> Vec<usize> {
        let (w, h) = img.dimensions();
        let mut seen = vec![false; (w * h) as usize];
        let mut sizes = Vec::new();
        for start in 0..(w * h) {
            if seen[start as usize] {
                continue;
            }
            let c = img.pixel(start % w, start / w);
            let mut stack = vec![start];
            seen[start as usize] = true;
            let mut n = 0;
            while let Some(p) = stack.pop() {
                n += 1;
                let (x, y) = ((p % w) as i64, (p / w) as i64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let q = (ny as u32) * w + nx as u32;
                        if !seen[q as usize] && img.pixel(nx as u32, ny as u32) == c {
                            seen[q as usize] = true;
                            stack.push(q);
                        }
                    }
                }
            }
            sizes.push(n);
        }
        sizes.sort_unstable();
        sizes
    }

    #[test]
    fn uniform_image_is_one_segment() {
        let segs = segment_image(&solid(64, 64, [90, 120, 30]), &SegmentationConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].area(), 4096);
    }

    #[test]
    fn two_halves_match_exact_color_components() {
        let img = halves();
        let cfg = SegmentationConfig { min_segment_area: Some(16), ..Default::default() };
        let segs = segment_image(&img, &cfg).unwrap();
        let mut areas: Vec<usize> = segs.iter().map(|s| s.area()).collect();
        areas.sort_unstable();
        assert_eq!(areas, exact_components(&img));
        assert_eq!(areas, vec![2048, 2048]);
    }

    #[test]
    fn granularity_does_not_change_clean_partition() {
        let img = halves();
        let a = segment_image(&img, &SegmentationConfig { granularity: 2, min_segment_area: Some(16), ..Default::default() }).unwrap();
        let b = segment_image(&img, &SegmentationConfig { granularity: 8, min_segment_area: Some(16), ..Default::default() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_pixel_image() {
        let segs = segment_image(&solid(1, 1, [0, 0, 0]), &SegmentationConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].area(), 1);
    }

    #[test]
    fn small_specks_are_absorbed() {
        let mut px = RgbImage::from_pixel(40, 40, Rgb([250, 250, 250]));
        px.put_pixel(10, 10, Rgb([0, 0, 0]));
        px.put_pixel(30, 5, Rgb([255, 0, 0]));
        let img = InputImage::new(px).unwrap();
        let segs = segment_image(&img, &SegmentationConfig { min_segment_area: Some(4), ..Default::default() }).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].area(), 1600);
    }

    #[test]
    fn output_is_a_partition() {
        let img = InputImage::new(RgbImage::from_fn(50, 30, |x, y| Rgb([(x * 5) as u8, (y * 8) as u8, ((x ^ y) * 3) as u8]))).unwrap();
        let segs = segment_image(&img, &SegmentationConfig::default()).unwrap();
        let mut cover = vec![0u8; 1500];
        for s in &segs {
            for (x, y) in s.mask().iter_set() {
                cover[(y * 50 + x) as usize] += 1;
            }
        }
        assert!(cover.iter().all(|&c| c == 1));
    }
}
