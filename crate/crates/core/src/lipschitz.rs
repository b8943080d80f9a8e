//! Empirical Lipschitz estimate of the composite objective with respect to the mask.
//!
//! Each trial draws a mask uniformly from `[low, high]` per pixel and pairs it with a mask one
//! small step along the steepest-ascent direction. Pixels whose step would cross a
//! binarization threshold are held fixed, so both masks share coastline/sea sets and hard run
//! counts: the piecewise-constant parts of the objective do not produce jump ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, HsvImage, LabelMask, ProbMask};
use crate::losses::{loss_robust, HsvPriorParams, LossConfig};

#[derive(Debug, Clone)]
pub struct LipschitzProbe<'a> {
    pub labels: &'a LabelMask,
    pub hsv: &'a HsvImage,
    pub params: HsvPriorParams,
    pub loss: LossConfig,
    pub low: f64,
    pub high: f64,
    pub step: f64,
}

impl<'a> LipschitzProbe<'a> {
    pub fn new(
        labels: &'a LabelMask,
        hsv: &'a HsvImage,
        params: HsvPriorParams,
        loss: LossConfig,
    ) -> Self {
        Self {
            labels,
            hsv,
            params,
            loss,
            low: 0.1,
            high: 0.9,
            step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimate {
    pub estimate: f64,
    /// Running maximum after each trial.
    pub running_max: Vec<f64>,
}

impl LipschitzEstimate {
    /// Relative growth of the running max between trial `from` (1-based) and the last one.
    pub fn relative_change_since(&self, from: usize) -> f64 {
        let a = self.running_max[from.clamp(1, self.running_max.len()) - 1];
        let b = self.estimate;
        if a == 0.0 {
            if b == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (b - a) / a
        }
    }
}

fn crosses(a: f64, b: f64, t: f64) -> bool {
    (a >= t) != (b >= t)
}

/// Max over `trials` mask pairs of `|L(M1) - L(M2)| / ||M1 - M2||_2`.
pub fn estimate_lipschitz(
    probe: &LipschitzProbe<'_>,
    trials: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    if !(0.0 <= probe.low && probe.low < probe.high && probe.high <= 1.0 && probe.step > 0.0) {
        return Err(Error::Config(
            "invalid Lipschitz probe range or step".into(),
        ));
    }
    let (h, w) = probe.labels.dims();
    let thresholds = [probe.loss.threshold, probe.loss.conn.threshold];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    let mut running_max = Vec::with_capacity(trials);
    for _ in 0..trials {
        let m1 = ProbMask::new(Grid2D::from_fn(h, w, |_, _| {
            rng.random_range(probe.low..=probe.high)
        }))?;
        let b1 = loss_robust(&m1, probe.labels, probe.hsv, &probe.params, &probe.loss)?;
        let mut dir = b1.grad.clone();
        let mut norm = dir.l2_norm();
        if norm == 0.0 {
            for d in dir.values_mut() {
                *d = StandardNormal.sample(&mut rng);
            }
            norm = dir.l2_norm();
        }
        let mut m2 = m1.grid().clone();
        for (k, v) in m2.values_mut().iter_mut().enumerate() {
            let moved = (*v + probe.step * dir.values()[k] / norm).clamp(0.0, 1.0);
            if !thresholds.iter().any(|&t| crosses(*v, moved, t)) {
                *v = moved;
            }
        }
        let mut delta = m2.clone();
        delta.add_scaled(m1.grid(), -1.0);
        let dist = delta.l2_norm();
        let ratio = if dist == 0.0 {
            0.0
        } else {
            let b2 = loss_robust(
                &ProbMask::new(m2)?,
                probe.labels,
                probe.hsv,
                &probe.params,
                &probe.loss,
            )?;
            (b2.l_robust - b1.l_robust).abs() / dist
        };
        best = best.max(ratio);
        running_max.push(best);
    }
    Ok(LipschitzEstimate {
        estimate: best,
        running_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LossWeights, Term};

    fn inputs() -> (LabelMask, HsvImage) {
        let labels = LabelMask::new(Grid2D::from_fn(
            16,
            16,
            |i, _| if i >= 8 { 1.0 } else { 0.0 },
        ))
        .unwrap();
        let hsv = HsvImage::new(
            Grid2D::from_fn(16, 16, |i, j| (i * 16 + j) as f64 / 300.0),
            Grid2D::from_fn(16, 16, |i, _| 0.2 + 0.03 * i as f64),
            Grid2D::filled(16, 16, 0.5),
        )
        .unwrap();
        (labels, hsv)
    }

    #[test]
    fn zero_weights_give_zero() {
        let (y, hsv) = inputs();
        let cfg = LossConfig::default().with_weights(LossWeights::zero());
        let probe = LipschitzProbe::new(&y, &hsv, HsvPriorParams::default(), cfg);
        assert_eq!(estimate_lipschitz(&probe, 20, 1).unwrap().estimate, 0.0);
    }

    #[test]
    fn hsv_term_respects_quadratic_bound() {
        let (y, hsv) = inputs();
        let params = HsvPriorParams {
            sigma_bw: 1e9, // w == 1
            alpha_s: 1.0,
            ..Default::default()
        };
        let cfg = LossConfig::default().with_weights(LossWeights::only(Term::Hsv, 1.0));
        let mut probe = LipschitzProbe::new(&y, &hsv, params, cfg);
        probe.low = 0.0;
        probe.high = 1.0;
        let est = estimate_lipschitz(&probe, 200, 2).unwrap().estimate;
        let bound = 2.0 / (256f64).sqrt();
        assert!(est > 0.0 && est <= bound, "{est} > {bound}");
    }

    #[test]
    fn doubling_weights_doubles_estimate() {
        let (y, hsv) = inputs();
        let cfg = LossConfig::default();
        let a = estimate_lipschitz(
            &LipschitzProbe::new(&y, &hsv, HsvPriorParams::default(), cfg),
            50,
            3,
        )
        .unwrap();
        let cfg2 = cfg.with_weights(cfg.weights.scaled(2.0));
        let b = estimate_lipschitz(
            &LipschitzProbe::new(&y, &hsv, HsvPriorParams::default(), cfg2),
            50,
            3,
        )
        .unwrap();
        assert_eq!(b.estimate, 2.0 * a.estimate);
    }

    #[test]
    fn running_max_is_monotone() {
        let (y, hsv) = inputs();
        let est = estimate_lipschitz(
            &LipschitzProbe::new(&y, &hsv, HsvPriorParams::default(), LossConfig::default()),
            40,
            4,
        )
        .unwrap();
        assert!(est.running_max.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*est.running_max.last().unwrap(), est.estimate);
    }
}
