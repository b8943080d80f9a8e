use super::{sigmoid, ConnConfig, TermLoss};
use crate::components::count_column_regions;
use crate::error::Result;
use crate::grid::{Grid2D, ProbMask};

/// `sum_x max(0, (regions(column x) - 1) / max_regions)` with hard run counts.
pub fn loss_conn_hard(mask: &ProbMask, cfg: &ConnConfig) -> Result<f64> {
    cfg.validate()?;
    let m = mask.grid();
    let mut total = 0.0;
    for x in 0..m.width() {
        let regions = count_column_regions(&m.column(x), cfg.threshold);
        if regions > 1 {
            total += (regions - 1) as f64 / cfg.max_regions as f64;
        }
    }
    Ok(total)
}

/// Soft surrogate: per column, region count `sum_i max(0, b_i - b_{i-1})` with
/// `b_i = sigmoid((m_i - threshold) / tau)` and `b_{-1} = 0`, then the same hinge as the hard
/// term. Returns the surrogate value and its exact gradient.
pub fn loss_conn_soft(mask: &ProbMask, cfg: &ConnConfig) -> Result<TermLoss> {
    cfg.validate()?;
    let m = mask.grid();
    let (h, w) = m.dims();
    let mut grad = Grid2D::zeros(h, w);
    let inv_regions = 1.0 / cfg.max_regions as f64;
    let mut total = 0.0;
    let mut b = vec![0.0; h];
    let mut db = vec![0.0; h];
    let mut rising = vec![false; h];
    for x in 0..w {
        let mut soft = 0.0;
        let mut prev = 0.0;
        for i in 0..h {
            let bi = sigmoid((m.get(i, x) - cfg.threshold) / cfg.tau_soft);
            b[i] = bi;
            db[i] = bi * (1.0 - bi) / cfg.tau_soft;
            rising[i] = bi > prev;
            if rising[i] {
                soft += bi - prev;
            }
            prev = bi;
        }
        if soft <= 1.0 {
            continue;
        }
        total += (soft - 1.0) * inv_regions;
        for i in 0..h {
            if rising[i] {
                grad.values_mut()[i * w + x] += db[i] * inv_regions;
                if i > 0 {
                    grad.values_mut()[(i - 1) * w + x] -= db[i - 1] * inv_regions;
                }
            }
        }
    }
    Ok(TermLoss { value: total, grad })
}

/// Column connectivity: hard value paired with the surrogate gradient.
pub fn loss_conn(mask: &ProbMask, cfg: &ConnConfig) -> Result<TermLoss> {
    let value = loss_conn_hard(mask, cfg)?;
    let soft = loss_conn_soft(mask, cfg)?;
    Ok(TermLoss {
        value,
        grad: soft.grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(values: &[f64]) -> ProbMask {
        ProbMask::new(Grid2D::new(values.len(), 1, values.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn single_run_and_all_land_are_free() {
        let cfg = ConnConfig::default();
        let m =
            ProbMask::new(Grid2D::from_fn(6, 4, |i, _| if i >= 3 { 1.0 } else { 0.0 })).unwrap();
        assert_eq!(loss_conn(&m, &cfg).unwrap().value, 0.0);
        let land = ProbMask::filled(6, 4, 0.0).unwrap();
        assert_eq!(loss_conn(&land, &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn two_runs_cost_one_tenth() {
        let cfg = ConnConfig {
            max_regions: 10,
            ..Default::default()
        };
        let l = loss_conn(&col(&[1.0, 0.0, 1.0, 0.0]), &cfg).unwrap();
        assert!((l.value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn soft_matches_hard_as_tau_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = ProbMask::new(Grid2D::from_fn(10, 8, |_, _| {
            if rng.random_bool(0.5) {
                1.0
            } else {
                0.0
            }
        }))
        .unwrap();
        let hard = loss_conn_hard(&m, &ConnConfig::default()).unwrap();
        assert!(hard > 0.0);
        let mut last_gap = f64::INFINITY;
        for tau in [0.1, 0.03, 0.01, 1e-3] {
            let cfg = ConnConfig {
                tau_soft: tau,
                ..Default::default()
            };
            let gap = (loss_conn_soft(&m, &cfg).unwrap().value - hard).abs();
            assert!(gap <= last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-12, "gap {last_gap}");
    }

    #[test]
    fn hard_value_invariant_under_vertical_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = ConnConfig::default();
        for _ in 0..10 {
            let m = Grid2D::from_fn(9, 7, |_, _| rng.random_range(0.0..1.0));
            let flipped = Grid2D::from_fn(9, 7, |i, j| m.get(8 - i, j));
            let a = loss_conn_hard(&ProbMask::new(m).unwrap(), &cfg).unwrap();
            let b = loss_conn_hard(&ProbMask::new(flipped).unwrap(), &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn soft_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = ConnConfig::default();
        let m = ProbMask::new(Grid2D::from_fn(8, 5, |_, _| rng.random_range(0.2..0.8))).unwrap();
        let l = loss_conn_soft(&m, &cfg).unwrap();
        assert!(l.value > 0.0);
        let h = 1e-6;
        for k in 0..40 {
            let mut plus = m.grid().clone();
            plus.values_mut()[k] += h;
            let mut minus = m.grid().clone();
            minus.values_mut()[k] -= h;
            let f = |g: Grid2D| {
                loss_conn_soft(&ProbMask::new(g).unwrap(), &cfg)
                    .unwrap()
                    .value
            };
            let fd = (f(plus) - f(minus)) / (2.0 * h);
            let a = l.grad.values()[k];
            assert!(
                (fd - a).abs() <= 1e-5 * a.abs().max(1e-2),
                "{k}: {a} vs {fd}"
            );
        }
    }
}
