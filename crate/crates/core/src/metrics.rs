//! Confusion-matrix metrics, aggregate statistics, and the HSV/label correlation.

use std::fmt;

use crate::error::Result;
use crate::grid::{LabelMask, ProbMask};
use crate::losses::{hsv_water_likelihood, HsvPriorParams};
use crate::synth::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_masks(mask: &ProbMask, labels: &LabelMask, threshold: f64) -> Result<Self> {
        mask.grid().check_same_dims(labels.grid())?;
        let mut c = Confusion::default();
        for (&m, &y) in mask.values().iter().zip(labels.values()) {
            match (m >= threshold, y == 1.0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Empty union counts as perfect agreement.
    pub fn iou(&self) -> f64 {
        let denom = self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            iou: self.iou(),
            f1: self.f1(),
            accuracy: self.accuracy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub iou: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// IoU, F1, and accuracy of `mask` binarized at `threshold`.
pub fn evaluate(mask: &ProbMask, labels: &LabelMask, threshold: f64) -> Result<Metrics> {
    Ok(Confusion::from_masks(mask, labels, threshold)?.metrics())
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        Self {
            mean,
            std: variance(values).sqrt(),
        }
    }
}

/// Renders as `0.9645 ± 0.0030`.
impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

/// Population variance, computed on values shifted by the first sample so that a constant
/// sequence gives exactly zero.
pub fn variance(values: &[f64]) -> f64 {
    let Some(&first) = values.first() else {
        return f64::NAN;
    };
    let n = values.len() as f64;
    let shifted = || values.iter().map(move |v| v - first);
    let mean = shifted().sum::<f64>() / n;
    shifted().map(|d| (d - mean).powi(2)).sum::<f64>() / n
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between the HSV water likelihood and the labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho {
    pub rho: f64,
    /// Set when either variable is constant; `rho` is then 0.
    pub degenerate: bool,
}

impl Rho {
    pub fn from_samples(likelihood: &[f64], labels: &[f64]) -> Self {
        match pearson(likelihood, labels) {
            Some(rho) => Rho {
                rho,
                degenerate: false,
            },
            None => Rho {
                rho: 0.0,
                degenerate: true,
            },
        }
    }
}

/// Pearson correlation of `P_HSV` (under `params`) with the labels, pooled over every pixel
/// of every scene.
pub fn rho_correlation<'a>(
    scenes: impl IntoIterator<Item = &'a Scene>,
    params: &HsvPriorParams,
) -> Rho {
    let mut p = Vec::new();
    let mut y = Vec::new();
    for scene in scenes {
        p.extend_from_slice(hsv_water_likelihood(&scene.hsv, params).values());
        y.extend_from_slice(scene.labels.values());
    }
    Rho::from_samples(&p, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    #[test]
    fn constant_sequence_has_zero_variance() {
        assert_eq!(variance(&[0.98656; 20]), 0.0);
        assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 1.25).abs() < 1e-15);
        assert!(variance(&[]).is_nan());
    }

    fn pm(v: &[f64]) -> ProbMask {
        ProbMask::new(Grid2D::new(2, 2, v.to_vec()).unwrap()).unwrap()
    }
    fn lm(v: &[f64]) -> LabelMask {
        LabelMask::new(Grid2D::new(2, 2, v.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let y = lm(&[1.0, 0.0, 0.0, 1.0]);
        let m = evaluate(&pm(&[1.0, 0.0, 0.0, 1.0]), &y, 0.5).unwrap();
        assert_eq!((m.iou, m.f1, m.accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn complement_prediction() {
        let y = lm(&[1.0, 0.0, 0.0, 1.0]);
        let m = evaluate(&pm(&[0.0, 1.0, 1.0, 0.0]), &y, 0.5).unwrap();
        assert_eq!((m.iou, m.f1, m.accuracy), (0.0, 0.0, 0.0));
    }

    #[test]
    fn confusion_arithmetic() {
        // TP=1, FP=1, FN=0, TN=2.
        let y = lm(&[1.0, 0.0, 0.0, 0.0]);
        let c = Confusion::from_masks(&pm(&[0.9, 0.7, 0.2, 0.0]), &y, 0.5).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 1,
                fn_: 0,
                tn: 2
            }
        );
        let m = c.metrics();
        assert_eq!(m.iou, 0.5);
        assert_eq!(m.f1, 2.0 / 3.0);
        assert_eq!(m.accuracy, 0.75);
    }

    #[test]
    fn empty_union_conventions() {
        let y = lm(&[0.0; 4]);
        let m = evaluate(&pm(&[0.1; 4]), &y, 0.5).unwrap();
        assert_eq!((m.iou, m.f1, m.accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn mean_std_format() {
        let ms = MeanStd::of(&[0.9615, 0.9675]);
        assert_eq!(ms.to_string(), "0.9645 ± 0.0030");
    }

    #[test]
    fn two_point_pearson() {
        let r = Rho::from_samples(&[0.2, 0.9], &[0.0, 1.0]);
        assert!((r.rho - 1.0).abs() < 1e-15 && !r.degenerate);
        let r = Rho::from_samples(&[0.9, 0.2], &[0.0, 1.0]);
        assert!((r.rho + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_likelihood_is_degenerate() {
        let r = Rho::from_samples(&[0.5, 0.5, 0.5], &[0.0, 1.0, 1.0]);
        assert_eq!(
            r,
            Rho {
                rho: 0.0,
                degenerate: true
            }
        );
    }

    #[test]
    fn pearson_affine_invariant() {
        let x = [0.1, 0.4, 0.35, 0.8, 0.05];
        let y = [0.0, 1.0, 0.0, 1.0, 0.0];
        let a = pearson(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| 3.0 * v + 0.2).collect();
        let b = pearson(&x2, &y).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
