//! Dense row-major grids and the typed image/mask wrappers built on them.

use crate::error::{Error, Result};

/// A dense `height x width` array of reals stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Grid2D {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {height}x{width} grid",
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// # Panics
    /// Panics if either dimension is zero.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        let mut values = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                values.push(f(i, j));
            }
        }
        Self {
            height,
            width,
            values,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.height).map(|i| self.get(i, col)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Grid2D, factor: f64) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn check_same_dims(&self, other: &Grid2D) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected_h: self.height,
                expected_w: self.width,
                got_h: other.height,
                got_w: other.width,
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    fn check_range(&self, lo: f64, hi: f64, hi_open: bool, range: &'static str) -> Result<()> {
        for (index, &value) in self.values.iter().enumerate() {
            let above = if hi_open { value >= hi } else { value > hi };
            // Negated so NaN is rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(value >= lo) || above {
                return Err(Error::OutOfRange {
                    value,
                    index,
                    range,
                });
            }
        }
        Ok(())
    }
}

/// Three-channel RGB image with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub(crate) r: Grid2D,
    pub(crate) g: Grid2D,
    pub(crate) b: Grid2D,
}

impl RgbImage {
    pub fn new(r: Grid2D, g: Grid2D, b: Grid2D) -> Result<Self> {
        r.check_same_dims(&g)?;
        r.check_same_dims(&b)?;
        for ch in [&r, &g, &b] {
            ch.check_range(0.0, 1.0, false, "[0, 1]")?;
        }
        Ok(Self { r, g, b })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut r = Grid2D::zeros(height, width);
        let mut g = Grid2D::zeros(height, width);
        let mut b = Grid2D::zeros(height, width);
        for i in 0..height {
            for j in 0..width {
                let [pr, pg, pb] = f(i, j);
                r.set(i, j, pr);
                g.set(i, j, pg);
                b.set(i, j, pb);
            }
        }
        Self::new(r, g, b)
    }

    pub fn r(&self) -> &Grid2D {
        &self.r
    }
    pub fn g(&self) -> &Grid2D {
        &self.g
    }
    pub fn b(&self) -> &Grid2D {
        &self.b
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        [
            self.r.get(row, col),
            self.g.get(row, col),
            self.b.get(row, col),
        ]
    }
}

/// HSV image: hue in `[0, 1)`, saturation and value in `[0, 1]`.
/// Achromatic pixels (`s == 0`) carry hue 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    pub(crate) h: Grid2D,
    pub(crate) s: Grid2D,
    pub(crate) v: Grid2D,
}

impl HsvImage {
    pub fn new(h: Grid2D, s: Grid2D, v: Grid2D) -> Result<Self> {
        h.check_same_dims(&s)?;
        h.check_same_dims(&v)?;
        h.check_range(0.0, 1.0, true, "[0, 1)")?;
        s.check_range(0.0, 1.0, false, "[0, 1]")?;
        v.check_range(0.0, 1.0, false, "[0, 1]")?;
        for (index, (&hv, &sv)) in h.values().iter().zip(s.values()).enumerate() {
            if sv == 0.0 && hv != 0.0 {
                return Err(Error::OutOfRange {
                    value: hv,
                    index,
                    range: "{0} (hue of an achromatic pixel)",
                });
            }
        }
        Ok(Self { h, s, v })
    }

    pub fn h(&self) -> &Grid2D {
        &self.h
    }
    pub fn s(&self) -> &Grid2D {
        &self.s
    }
    pub fn v(&self) -> &Grid2D {
        &self.v
    }

    pub fn dims(&self) -> (usize, usize) {
        self.h.dims()
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        [
            self.h.get(row, col),
            self.s.get(row, col),
            self.v.get(row, col),
        ]
    }
}

/// Per-pixel water probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMask(Grid2D);

impl ProbMask {
    pub fn new(grid: Grid2D) -> Result<Self> {
        grid.check_range(0.0, 1.0, false, "[0, 1]")?;
        Ok(Self(grid))
    }

    /// Clamps every value into `[0, 1]`; NaN maps to 0.
    pub fn clamped(grid: Grid2D) -> Self {
        Self(grid.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(Grid2D::filled(height, width, value))
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
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }
}

/// Ground-truth labels, every value exactly 0 (land) or 1 (water).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask(Grid2D);

impl LabelMask {
    pub fn new(grid: Grid2D) -> Result<Self> {
        check_binary(&grid)?;
        Ok(Self(grid))
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
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    /// The labels as a (saturated) probability mask.
    pub fn to_prob(&self) -> ProbMask {
        ProbMask(self.0.clone())
    }

    pub fn water_count(&self) -> usize {
        self.0.values().iter().filter(|&&v| v == 1.0).count()
    }
}

pub(crate) fn check_binary(grid: &Grid2D) -> Result<()> {
    for (index, &value) in grid.values().iter().enumerate() {
        if value != 0.0 && value != 1.0 {
            return Err(Error::OutOfRange {
                value,
                index,
                range: "{0, 1}",
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid2D::new(0, 3, vec![]).is_err());
        assert!(Grid2D::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Grid2D::new(2, 2, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn mask_ranges_enforced() {
        assert!(ProbMask::new(Grid2D::filled(2, 2, 1.5)).is_err());
        assert!(ProbMask::new(Grid2D::filled(2, 2, f64::NAN)).is_err());
        assert!(LabelMask::new(Grid2D::filled(1, 1, 0.5)).is_err());
        assert!(LabelMask::new(Grid2D::filled(1, 1, 1.0)).is_ok());
    }

    #[test]
    fn hsv_achromatic_hue_must_be_zero() {
        let h = Grid2D::filled(1, 1, 0.3);
        let s = Grid2D::filled(1, 1, 0.0);
        let v = Grid2D::filled(1, 1, 0.5);
        assert!(HsvImage::new(h, s.clone(), v.clone()).is_err());
        assert!(HsvImage::new(Grid2D::zeros(1, 1), s, v).is_ok());
    }

    #[test]
    fn hue_is_half_open() {
        let one = Grid2D::filled(1, 1, 1.0);
        assert!(HsvImage::new(one.clone(), one.clone(), one).is_err());
    }
}
