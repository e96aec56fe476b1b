//! Binary rasters stored over a bounding window of a larger image.

use crate::geom::BBox;

/// A binary raster with the logical size of the whole image.
///
/// Only the pixels inside `window` are stored; everything outside reads as
/// unset. Equality compares the logical raster, not the storage window.
#[derive(Debug, Clone)]
pub struct Mask {
    width: u32,
    height: u32,
    window: BBox,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32, window: BBox) -> Self {
        assert!(window.x1 <= width && window.y1 <= height, "mask window outside image");
        let len = window.width() as usize * window.height() as usize;
        Self { width, height, window, bits: vec![false; len] }
    }

    pub fn full(width: u32, height: u32) -> Self {
        let window = BBox { x0: 0, y0: 0, x1: width, y1: height };
        let mut m = Self::empty(width, height, window);
        m.bits.fill(true);
        m
    }

    /// Builds a mask over `window` from a predicate on absolute coordinates.
    pub fn from_fn(width: u32, height: u32, window: BBox, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::empty(width, height, window);
        let w = window.width() as usize;
        for y in window.y0..window.y1 {
            for x in window.x0..window.x1 {
                let i = (y - window.y0) as usize * w + (x - window.x0) as usize;
                m.bits[i] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn window(&self) -> BBox {
        self.window
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> Option<usize> {
        self.window
            .contains(x, y)
            .then(|| (y - self.window.y0) as usize * self.window.width() as usize + (x - self.window.x0) as usize)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.index(x, y).is_some_and(|i| self.bits[i])
    }

    /// Signed-coordinate lookup; anything off the image is unset.
    #[inline]
    pub fn get_i(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 && self.get(x as u32, y as u32)
    }

    /// Panics if `(x, y)` is outside the storage window.
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.index(x, y).expect("pixel outside mask window");
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.window.width().max(1) as usize;
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(move |(i, _)| {
            (self.window.x0 + (i % w) as u32, self.window.y0 + (i / w) as u32)
        })
    }

    /// Tight bounding box of the set pixels.
    pub fn tight_bbox(&self) -> Option<BBox> {
        let mut out: Option<BBox> = None;
        for (x, y) in self.iter_set() {
            let b = BBox { x0: x, y0: y, x1: x + 1, y1: y + 1 };
            out = Some(out.map_or(b, |o| o.union(&b)));
        }
        out
    }

    /// Shrinks the storage window to the tight bounding box. `None` when empty.
    pub fn tightened(&self) -> Option<Mask> {
        let bbox = self.tight_bbox()?;
        Some(Mask::from_fn(self.width, self.height, bbox, |x, y| self.get(x, y)))
    }

    pub fn intersection_count(&self, other: &Mask) -> usize {
        match self.window.intersect(&other.window) {
            None => 0,
            Some(b) => {
                let mut n = 0;
                for y in b.y0..b.y1 {
                    for x in b.x0..b.x1 {
                        if self.get(x, y) && other.get(x, y) {
                            n += 1;
                        }
                    }
                }
                n
            }
        }
    }

    /// Clears every pixel that is set in `other`.
    pub fn subtract(&mut self, other: &Mask) {
        if let Some(b) = self.window.intersect(&other.window) {
            for y in b.y0..b.y1 {
                for x in b.x0..b.x1 {
                    if other.get(x, y) {
                        self.set(x, y, false);
                    }
                }
            }
        }
    }
}

impl PartialEq for Mask {
    fn eq(&self, other: &Self) -> bool {
        if self.dimensions() != other.dimensions() {
            return false;
        }
        let all = self.window.union(&other.window);
        (all.y0..all.y1).all(|y| (all.x0..all.x1).all(|x| self.get(x, y) == other.get(x, y)))
    }
}

impl Eq for Mask {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_ignores_storage_window() {
        let a = Mask::from_fn(8, 8, BBox { x0: 0, y0: 0, x1: 8, y1: 8 }, |x, y| x == 3 && y == 4);
        let b = a.tightened().unwrap();
        assert_eq!(b.window(), BBox { x0: 3, y0: 4, x1: 4, y1: 5 });
        assert_eq!(a, b);
        assert_eq!(b.count(), 1);
        assert!(!b.get(0, 0));
    }

    #[test]
    fn subtract_and_intersect() {
        let full = Mask::full(4, 4);
        let mut a = full.clone();
        let corner = Mask::from_fn(4, 4, BBox { x0: 0, y0: 0, x1: 2, y1: 2 }, |_, _| true);
        assert_eq!(a.intersection_count(&corner), 4);
        a.subtract(&corner);
        assert_eq!(a.count(), 12);
        assert_eq!(a.intersection_count(&corner), 0);
    }
}
