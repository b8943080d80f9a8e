use super::{
    coast::loss_coast_with_set, conn::loss_conn_hard, conn::loss_conn_soft, hsv, loss_ce,
    sea::loss_sea_with_set, sea_set, HsvPriorParams, LossBundle, LossConfig, Term, TermLoss,
};
use crate::error::Result;
use crate::grid::{Grid2D, HsvImage, LabelMask, ProbMask};
use crate::morphology::{coastline_set, BinaryMask, CoastlineSet};

/// Coastline and sea sets captured from one mask, reused while the mask is perturbed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenSets {
    pub coast: CoastlineSet,
    pub sea: BinaryMask,
}

impl FrozenSets {
    pub fn compute(mask: &ProbMask, cfg: &LossConfig) -> Result<Self> {
        Ok(Self {
            coast: coastline_set(mask, cfg.coast_k, cfg.threshold)?,
            sea: sea_set(mask, cfg.sea_min_area, cfg.threshold, cfg.sea_connectivity),
        })
    }
}

/// Composite objective with sets recomputed from `mask`.
pub fn loss_robust(
    mask: &ProbMask,
    labels: &LabelMask,
    hsv: &HsvImage,
    params: &HsvPriorParams,
    cfg: &LossConfig,
) -> Result<LossBundle> {
    cfg.validate_settings()?;
    let frozen = FrozenSets::compute(mask, cfg)?;
    loss_robust_frozen(mask, labels, hsv, params, cfg, &frozen)
}

/// Per-term values and mask gradients. The connectivity entry carries the soft surrogate.
pub(crate) fn term_losses(
    mask: &ProbMask,
    labels: &LabelMask,
    hsv: &HsvImage,
    params: &HsvPriorParams,
    cfg: &LossConfig,
    frozen: &FrozenSets,
) -> Result<[TermLoss; 5]> {
    mask.grid().check_same_dims(labels.grid())?;
    mask.grid().check_same_dims(hsv.h())?;
    mask.grid().check_same_dims(frozen.sea.grid())?;
    let ce = loss_ce(mask, labels, cfg.ce_eps)?;
    let hsv_term = hsv::loss_hsv(mask, hsv, params)?;
    let coast = loss_coast_with_set(mask, &frozen.coast);
    let conn = loss_conn_soft(mask, &cfg.conn)?;
    let sea = loss_sea_with_set(mask, cfg.sea_window, &frozen.sea)?;
    Ok([ce, hsv_term, coast, conn, sea])
}

pub fn loss_robust_frozen(
    mask: &ProbMask,
    labels: &LabelMask,
    hsv: &HsvImage,
    params: &HsvPriorParams,
    cfg: &LossConfig,
    frozen: &FrozenSets,
) -> Result<LossBundle> {
    let terms = term_losses(mask, labels, hsv, params, cfg, frozen)?;
    let l_conn = loss_conn_hard(mask, &cfg.conn)?;
    let (h, w) = mask.dims();
    let mut grad = Grid2D::zeros(h, w);
    let mut l_robust = 0.0;
    let mut l_smooth = 0.0;
    for (term, t) in Term::ALL.into_iter().zip(&terms) {
        let lambda = cfg.weights.get(term);
        if lambda == 0.0 {
            continue;
        }
        let reported = if term == Term::Conn { l_conn } else { t.value };
        l_robust += lambda * reported;
        l_smooth += lambda * t.value;
        grad.add_scaled(&t.grad, lambda);
    }
    let [ce, hsv_term, coast, conn, sea] = terms;
    Ok(LossBundle {
        l_ce: ce.value,
        l_hsv: hsv_term.value,
        l_coast: coast.value,
        l_conn,
        l_sea: sea.value,
        l_robust,
        l_conn_soft: conn.value,
        l_smooth,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{loss_coast, loss_conn, loss_hsv, loss_sea, LossWeights};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, n: usize) -> (ProbMask, LabelMask, HsvImage, HsvPriorParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = LabelMask::new(Grid2D::from_fn(
            n,
            n,
            |i, _| {
                if i >= n / 2 {
                    1.0
                } else {
                    0.0
                }
            },
        ))
        .unwrap();
        let mask = ProbMask::new(Grid2D::from_fn(n, n, |i, _| {
            let base = if i >= n / 2 { 0.75 } else { 0.25 };
            base + rng.random_range(-0.2..0.2)
        }))
        .unwrap();
        let mut gen = || Grid2D::from_fn(n, n, |_, _| rng.random_range(0.1..0.9));
        let hsv = HsvImage::new(gen(), gen(), gen()).unwrap();
        let params = HsvPriorParams {
            alpha_h: 0.5,
            alpha_s: -1.0,
            alpha_v: 0.3,
            beta: 0.1,
            ..Default::default()
        };
        (mask, labels, hsv, params)
    }

    #[test]
    fn ce_only_equals_ce() {
        let (m, y, hsv, p) = instance(1, 8);
        let cfg = LossConfig::default().with_weights(LossWeights::ce_only());
        let b = loss_robust(&m, &y, &hsv, &p, &cfg).unwrap();
        let ce = loss_ce(&m, &y, cfg.ce_eps).unwrap();
        assert_eq!(b.l_robust, ce.value);
        assert_eq!(b.grad, ce.grad);
    }

    #[test]
    fn unit_weights_sum_independent_terms() {
        let (m, y, hsv, p) = instance(2, 8);
        let weights = LossWeights {
            ce: 1.0,
            hsv: 1.0,
            coast: 1.0,
            conn: 1.0,
            sea: 1.0,
        };
        let cfg = LossConfig {
            weights,
            sea_min_area: 4,
            ..Default::default()
        };
        let b = loss_robust(&m, &y, &hsv, &p, &cfg).unwrap();
        let sum = loss_ce(&m, &y, cfg.ce_eps).unwrap().value
            + loss_hsv(&m, &hsv, &p).unwrap().value
            + loss_coast(&m, cfg.coast_k, cfg.threshold).unwrap().value
            + loss_conn(&m, &cfg.conn).unwrap().value
            + loss_sea(&m, cfg.sea_window, cfg.sea_min_area, cfg.threshold)
                .unwrap()
                .value;
        assert!((b.l_robust - sum).abs() <= 1e-12 * sum.abs());
        assert!(b.l_sea > 0.0 && b.l_coast > 0.0);
    }

    #[test]
    fn doubling_weights_doubles_exactly() {
        let (m, y, hsv, p) = instance(3, 8);
        let cfg = LossConfig::default();
        let a = loss_robust(&m, &y, &hsv, &p, &cfg).unwrap();
        let doubled = cfg.with_weights(cfg.weights.scaled(2.0));
        let b = loss_robust(&m, &y, &hsv, &p, &doubled).unwrap();
        assert_eq!(b.l_robust, 2.0 * a.l_robust);
        assert_eq!(b.grad, a.grad.scaled(2.0));
    }

    #[test]
    fn components_are_non_negative() {
        for seed in 0..10 {
            let (m, y, hsv, p) = instance(seed, 7);
            let b = loss_robust(&m, &y, &hsv, &p, &LossConfig::default()).unwrap();
            for t in Term::ALL {
                assert!(b.term(t) >= 0.0, "{t}");
            }
            assert!(b.l_conn_soft >= 0.0);
        }
    }

    #[test]
    fn ce_and_hsv_invariant_under_joint_permutation() {
        let (m, y, hsv, p) = instance(4, 6);
        let n = 36;
        let perm: Vec<usize> = (0..n).map(|k| (k * 7 + 3) % n).collect();
        let permute =
            |g: &Grid2D| Grid2D::new(6, 6, perm.iter().map(|&k| g.values()[k]).collect()).unwrap();
        let m2 = ProbMask::new(permute(m.grid())).unwrap();
        let y2 = LabelMask::new(permute(y.grid())).unwrap();
        let hsv2 = HsvImage::new(permute(hsv.h()), permute(hsv.s()), permute(hsv.v())).unwrap();
        let ce = |m: &ProbMask, y: &LabelMask| loss_ce(m, y, 1e-7).unwrap().value;
        assert!((ce(&m, &y) - ce(&m2, &y2)).abs() < 1e-14);
        let a = loss_hsv(&m, &hsv, &p).unwrap().value;
        let b = loss_hsv(&m2, &hsv2, &p).unwrap().value;
        assert!((a - b).abs() < 1e-14);
    }
}
