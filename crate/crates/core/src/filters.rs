//! Spatial gradient and local neighborhood statistics on masks.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ProbMask};

/// Forward differences `gx(i,j) = m(i,j+1) - m(i,j)` and `gy(i,j) = m(i+1,j) - m(i,j)`.
/// The last column of `gx` and the last row of `gy` are zero (replicate boundary).
pub fn spatial_gradient(mask: &ProbMask) -> (Grid2D, Grid2D) {
    forward_differences(mask.grid())
}

pub(crate) fn forward_differences(m: &Grid2D) -> (Grid2D, Grid2D) {
    let (h, w) = m.dims();
    let gx = Grid2D::from_fn(h, w, |i, j| {
        if j + 1 < w {
            m.get(i, j + 1) - m.get(i, j)
        } else {
            0.0
        }
    });
    let gy = Grid2D::from_fn(h, w, |i, j| {
        if i + 1 < h {
            m.get(i + 1, j) - m.get(i, j)
        } else {
            0.0
        }
    });
    (gx, gy)
}

pub(crate) fn check_window(window: usize) -> Result<usize> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidWindow(window));
    }
    Ok(window / 2)
}

/// Clipped window bounds `[lo, hi)` around `center`.
#[inline]
pub(crate) fn clipped(center: usize, radius: usize, len: usize) -> (usize, usize) {
    (
        center.saturating_sub(radius),
        (center + radius + 1).min(len),
    )
}

/// Population variance of the mask over a `window x window` neighborhood centered at each
/// pixel. The neighborhood is clipped at the image border.
pub fn neighborhood_variance(mask: &ProbMask, window: usize) -> Result<Grid2D> {
    let radius = check_window(window)?;
    let m = mask.grid();
    let (h, w) = m.dims();
    Ok(Grid2D::from_fn(h, w, |i, j| {
        let stats = window_stats(m, i, j, radius);
        stats.variance
    }))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct WindowStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Mean and population variance over a clipped window. Values are shifted by the first
/// sample so a constant window yields exactly zero variance.
pub(crate) fn window_stats(m: &Grid2D, i: usize, j: usize, radius: usize) -> WindowStats {
    let (h, w) = m.dims();
    let (r0, r1) = clipped(i, radius, h);
    let (c0, c1) = clipped(j, radius, w);
    let count = (r1 - r0) * (c1 - c0);
    let origin = m.get(r0, c0);
    let mut sum = 0.0;
    for r in r0..r1 {
        for c in c0..c1 {
            sum += m.get(r, c) - origin;
        }
    }
    let shifted_mean = sum / count as f64;
    let mut ss = 0.0;
    for r in r0..r1 {
        for c in c0..c1 {
            let d = m.get(r, c) - origin - shifted_mean;
            ss += d * d;
        }
    }
    WindowStats {
        count,
        mean: origin + shifted_mean,
        variance: ss / count as f64,
    }
}
