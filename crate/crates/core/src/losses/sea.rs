use super::TermLoss;
use crate::components::{connected_components_2d, Connectivity};
use crate::error::Result;
use crate::filters::{check_window, clipped, window_stats};
use crate::grid::{Grid2D, ProbMask};
use crate::morphology::BinaryMask;

/// Pixels of thresholded-water components whose area is at least `min_area`.
pub fn sea_set(
    mask: &ProbMask,
    min_area: usize,
    threshold: f64,
    connectivity: Connectivity,
) -> BinaryMask {
    let water = BinaryMask::threshold(mask, threshold);
    let labeling = connected_components_2d(&water, connectivity);
    let (h, w) = mask.dims();
    BinaryMask::from_fn(h, w, |i, j| match labeling.label(i, j) {
        0 => false,
        id => labeling.areas()[id as usize - 1] >= min_area,
    })
}

/// Mean local variance over a fixed sea set; the set receives no gradient.
pub fn loss_sea_with_set(mask: &ProbMask, window: usize, sea: &BinaryMask) -> Result<TermLoss> {
    let radius = check_window(window)?;
    mask.grid().check_same_dims(sea.grid())?;
    let m = mask.grid();
    let (h, w) = m.dims();
    let mut grad = Grid2D::zeros(h, w);
    let size = sea.count();
    if size == 0 {
        return Ok(TermLoss { value: 0.0, grad });
    }
    let scale = 1.0 / size as f64;
    let mut sum = 0.0;
    for i in 0..h {
        for j in 0..w {
            if !sea.is_set(i, j) {
                continue;
            }
            let stats = window_stats(m, i, j, radius);
            sum += stats.variance;
            let coef = 2.0 * scale / stats.count as f64;
            let (r0, r1) = clipped(i, radius, h);
            let (c0, c1) = clipped(j, radius, w);
            for r in r0..r1 {
                for c in c0..c1 {
                    grad.values_mut()[r * w + c] += coef * (m.get(r, c) - stats.mean);
                }
            }
        }
    }
    Ok(TermLoss {
        value: sum * scale,
        grad,
    })
}

/// Sea cleanup with 4-connected sea detection.
pub fn loss_sea(
    mask: &ProbMask,
    window: usize,
    min_area: usize,
    threshold: f64,
) -> Result<TermLoss> {
    super::check_unit_open("threshold", threshold)?;
    if min_area == 0 {
        return Err(crate::error::Error::Config("min_area must be >= 1".into()));
    }
    let sea = sea_set(mask, min_area, threshold, Connectivity::Four);
    loss_sea_with_set(mask, window, &sea)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_water_has_zero_variance() {
        let m = ProbMask::filled(6, 6, 0.9).unwrap();
        let l = loss_sea(&m, 5, 4, 0.5).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grad.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn all_land_has_no_sea() {
        let m = ProbMask::filled(6, 6, 0.1).unwrap();
        assert_eq!(sea_set(&m, 1, 0.5, Connectivity::Four).count(), 0);
        let l = loss_sea(&m, 5, 1, 0.5).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grad.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn area_threshold_drops_small_components() {
        let m = ProbMask::new(Grid2D::from_fn(5, 5, |i, j| {
            if i >= 3 || (i == 0 && j == 0) {
                1.0
            } else {
                0.0
            }
        }))
        .unwrap();
        let s = sea_set(&m, 3, 0.5, Connectivity::Four);
        assert_eq!(s.count(), 10);
        assert!(!s.is_set(0, 0));
    }

    #[test]
    fn gradient_matches_central_differences_with_frozen_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // Water-ish lower half, noisy values.
        let m = ProbMask::new(Grid2D::from_fn(8, 8, |i, _| {
            if i >= 3 {
                rng.random_range(0.55..1.0)
            } else {
                rng.random_range(0.0..0.45)
            }
        }))
        .unwrap();
        let sea = sea_set(&m, 10, 0.5, Connectivity::Four);
        assert_eq!(sea.count(), 40);
        let l = loss_sea_with_set(&m, 5, &sea).unwrap();
        let h = 1e-5;
        for k in 0..64 {
            let mut plus = m.grid().clone();
            plus.values_mut()[k] += h;
            let mut minus = m.grid().clone();
            minus.values_mut()[k] -= h;
            let f = |g: Grid2D| {
                loss_sea_with_set(&ProbMask::clamped(g), 5, &sea)
                    .unwrap()
                    .value
            };
            let fd = (f(plus) - f(minus)) / (2.0 * h);
            let a = l.grad.values()[k];
            assert!(
                (fd - a).abs() <= 1e-6 * a.abs().max(1e-3),
                "{k}: {a} vs {fd}"
            );
        }
    }
}
