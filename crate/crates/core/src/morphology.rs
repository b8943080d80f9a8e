//! Binary morphology with square structuring elements and coastline-band extraction.
//!
//! Windows are clipped at the image border: pixels outside the image neither add to a
//! dilation nor block an erosion.

use crate::error::{Error, Result};
use crate::filters::{check_window, clipped};
use crate::grid::{check_binary, Grid2D, ProbMask};

/// A mask whose values are exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask(Grid2D);

impl BinaryMask {
    pub fn new(grid: Grid2D) -> Result<Self> {
        check_binary(&grid)?;
        Ok(Self(grid))
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        Self(Grid2D::from_fn(height, width, |i, j| {
            if f(i, j) {
                1.0
            } else {
                0.0
            }
        }))
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self(Grid2D::zeros(height, width))
    }

    /// `1` where `mask >= threshold`.
    pub fn threshold(mask: &ProbMask, threshold: f64) -> Self {
        let g = mask.grid();
        Self(g.map(|v| if v >= threshold { 1.0 } else { 0.0 }))
    }

    pub fn grid(&self) -> &Grid2D {
        &self.0
    }

    pub fn into_grid(self) -> Grid2D {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn is_set(&self, row: usize, col: usize) -> bool {
        self.0.get(row, col) != 0.0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.0.set(row, col, if on { 1.0 } else { 0.0 });
    }

    pub fn count(&self) -> usize {
        self.0.values().iter().filter(|&&v| v != 0.0).count()
    }

    pub fn complement(&self) -> Self {
        Self(self.0.map(|v| 1.0 - v))
    }

    /// `true` if every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.0
            .values()
            .iter()
            .zip(other.0.values())
            .all(|(&a, &b)| a <= b)
    }

    pub fn to_prob(&self) -> ProbMask {
        ProbMask::clamped(self.0.clone())
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(())
}

/// Separable clipped-window max (`dilate == true`) or min filter.
fn rank_filter(mask: &BinaryMask, k: usize, dilate: bool) -> Result<BinaryMask> {
    let radius = check_window(k)?;
    let (h, w) = mask.dims();
    let pick = |acc: bool, v: bool| if dilate { acc || v } else { acc && v };
    let mut rows = vec![false; h * w];
    for i in 0..h {
        for j in 0..w {
            let (c0, c1) = clipped(j, radius, w);
            rows[i * w + j] = (c0..c1).fold(!dilate, |acc, c| pick(acc, mask.is_set(i, c)));
        }
    }
    Ok(BinaryMask::from_fn(h, w, |i, j| {
        let (r0, r1) = clipped(i, radius, h);
        (r0..r1).fold(!dilate, |acc, r| pick(acc, rows[r * w + j]))
    }))
}

/// Square `k x k` dilation.
pub fn dilate(mask: &BinaryMask, k: usize) -> Result<BinaryMask> {
    rank_filter(mask, k, true)
}

/// Square `k x k` erosion.
pub fn erode(mask: &BinaryMask, k: usize) -> Result<BinaryMask> {
    rank_filter(mask, k, false)
}

/// Erosion followed by dilation.
pub fn open(mask: &BinaryMask, k: usize) -> Result<BinaryMask> {
    dilate(&erode(mask, k)?, k)
}

/// Dilation followed by erosion.
pub fn close(mask: &BinaryMask, k: usize) -> Result<BinaryMask> {
    erode(&dilate(mask, k)?, k)
}

/// Pixels in the morphological boundary band `dilate(M, k) \ erode(M, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoastlineSet {
    height: usize,
    width: usize,
    pixels: Vec<(usize, usize)>,
}

impl CoastlineSet {
    /// Row-major coordinates.
    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn cardinality(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn to_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::empty(self.height, self.width);
        for &(i, j) in &self.pixels {
            m.set(i, j, true);
        }
        m
    }
}

pub fn coastline_band(mask: &BinaryMask, k: usize) -> Result<CoastlineSet> {
    let dil = dilate(mask, k)?;
    let ero = erode(mask, k)?;
    let (height, width) = mask.dims();
    let mut pixels = Vec::new();
    for i in 0..height {
        for j in 0..width {
            if dil.is_set(i, j) && !ero.is_set(i, j) {
                pixels.push((i, j));
            }
        }
    }
    Ok(CoastlineSet {
        height,
        width,
        pixels,
    })
}

/// Binarizes `mask` at `threshold` and extracts the dilate-minus-erode band.
pub fn coastline_set(mask: &ProbMask, k: usize, threshold: f64) -> Result<CoastlineSet> {
    check_threshold(threshold)?;
    coastline_band(&BinaryMask::threshold(mask, threshold), k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        BinaryMask::from_fn(h, w, |i, j| rows[i].as_bytes()[j] == b'1')
    }

    #[test]
    fn even_kernel_rejected() {
        let m = BinaryMask::empty(3, 3);
        assert!(dilate(&m, 2).is_err());
        assert!(erode(&m, 4).is_err());
        assert!(coastline_set(&m.to_prob(), 2, 0.5).is_err());
    }

    #[test]
    fn threshold_outside_unit_interval_rejected() {
        let m = ProbMask::filled(2, 2, 0.5).unwrap();
        assert!(coastline_set(&m, 3, 0.0).is_err());
        assert!(coastline_set(&m, 3, 1.0).is_err());
    }

    #[test]
    fn dilate_empty_and_point() {
        assert_eq!(dilate(&BinaryMask::empty(4, 4), 3).unwrap().count(), 0);
        let m = bm(&["00000", "00000", "00100", "00000", "00000"]);
        let d = dilate(&m, 3).unwrap();
        assert_eq!(d, bm(&["00000", "01110", "01110", "01110", "00000"]));
    }

    #[test]
    fn dilate_two_diagonal_corners() {
        let m = bm(&["1000", "0000", "0000", "0001"]);
        let d = dilate(&m, 3).unwrap();
        // Max-over-window oracle.
        let oracle = BinaryMask::from_fn(4, 4, |i, j| {
            let near = |a: usize, b: usize| a.abs_diff(i) <= 1 && b.abs_diff(j) <= 1;
            near(0, 0) || near(3, 3)
        });
        assert_eq!(d, oracle);
        assert_eq!(d, bm(&["1100", "1100", "0011", "0011"]));
    }

    #[test]
    fn erode_full_and_point() {
        let full = BinaryMask::from_fn(4, 4, |_, _| true);
        assert_eq!(erode(&full, 3).unwrap(), full);
        let m = bm(&["000", "010", "000"]);
        assert_eq!(erode(&m, 3).unwrap().count(), 0);
    }

    #[test]
    fn coastline_of_uniform_mask_is_empty() {
        for v in [0.0, 0.3, 1.0] {
            let m = ProbMask::filled(5, 6, v).unwrap();
            assert!(coastline_set(&m, 3, 0.5).unwrap().is_empty());
        }
    }

    #[test]
    fn coastline_of_left_water_band() {
        let m = bm(&["1100", "1100", "1100", "1100"]).to_prob();
        let c = coastline_set(&m, 3, 0.5).unwrap();
        let expected: Vec<_> = (0..4).flat_map(|i| [(i, 1), (i, 2)]).collect();
        assert_eq!(c.pixels(), expected.as_slice());
        assert_eq!(c.cardinality(), 8);
    }

    #[test]
    fn coastline_of_checker() {
        let m = bm(&["10", "01"]).to_prob();
        assert_eq!(coastline_set(&m, 3, 0.5).unwrap().cardinality(), 4);
    }

    #[test]
    fn threshold_is_inclusive() {
        let m = ProbMask::new(Grid2D::new(1, 2, vec![0.5, 0.49]).unwrap()).unwrap();
        let b = BinaryMask::threshold(&m, 0.5);
        assert!(b.is_set(0, 0));
        assert!(!b.is_set(0, 1));
    }
}
