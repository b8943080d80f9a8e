use super::TermLoss;
use crate::error::Result;
use crate::filters::forward_differences;
use crate::grid::{Grid2D, ProbMask};
use crate::morphology::{coastline_set, CoastlineSet};

/// Mean squared forward-difference gradient over a fixed coastline set.
///
/// The set is a constant here: the gradient only flows through the mask values.
pub fn loss_coast_with_set(mask: &ProbMask, set: &CoastlineSet) -> TermLoss {
    let m = mask.grid();
    let (h, w) = m.dims();
    let mut grad = Grid2D::zeros(h, w);
    if set.is_empty() {
        return TermLoss { value: 0.0, grad };
    }
    let (gx, gy) = forward_differences(m);
    let scale = 1.0 / set.cardinality() as f64;
    let mut sum = 0.0;
    for &(i, j) in set.pixels() {
        let dx = gx.get(i, j);
        let dy = gy.get(i, j);
        sum += dx * dx + dy * dy;
        if j + 1 < w {
            let g = 2.0 * dx * scale;
            grad.values_mut()[i * w + j + 1] += g;
            grad.values_mut()[i * w + j] -= g;
        }
        if i + 1 < h {
            let g = 2.0 * dy * scale;
            grad.values_mut()[(i + 1) * w + j] += g;
            grad.values_mut()[i * w + j] -= g;
        }
    }
    TermLoss {
        value: sum * scale,
        grad,
    }
}

/// Coastline smoothness: recomputes the coastline set from `mask`, then evaluates
/// [`loss_coast_with_set`].
pub fn loss_coast(mask: &ProbMask, k: usize, threshold: f64) -> Result<TermLoss> {
    let set = coastline_set(mask, k, threshold)?;
    Ok(loss_coast_with_set(mask, &set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_mask_has_no_coast() {
        let m = ProbMask::filled(5, 5, 0.8).unwrap();
        let l = loss_coast(&m, 3, 0.5).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grad.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn hard_step() {
        // Columns 0-1 water. C = columns 1 and 2 (8 pixels); only column 1 has a unit
        // forward difference (m(i,2) - m(i,1) = -1), so the value is 4/8.
        let m = ProbMask::new(Grid2D::from_fn(4, 4, |_, j| if j < 2 { 1.0 } else { 0.0 })).unwrap();
        let l = loss_coast(&m, 3, 0.5).unwrap();
        assert_eq!(l.value, 0.5);
    }

    #[test]
    fn gradient_matches_central_differences_with_frozen_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = ProbMask::new(Grid2D::from_fn(6, 6, |_, _| rng.random_range(0.0..1.0))).unwrap();
        let set = coastline_set(&m, 3, 0.5).unwrap();
        assert!(!set.is_empty());
        let l = loss_coast_with_set(&m, &set);
        let h = 1e-5;
        for k in 0..36 {
            let mut plus = m.grid().clone();
            plus.values_mut()[k] += h;
            let mut minus = m.grid().clone();
            minus.values_mut()[k] -= h;
            let f = |g: Grid2D| loss_coast_with_set(&ProbMask::clamped(g), &set).value;
            let fd = (f(plus) - f(minus)) / (2.0 * h);
            let a = l.grad.values()[k];
            assert!(
                (fd - a).abs() <= 1e-6 * a.abs().max(1e-3),
                "{k}: {a} vs {fd}"
            );
        }
    }
}
