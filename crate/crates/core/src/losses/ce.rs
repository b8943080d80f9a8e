use super::TermLoss;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, LabelMask, ProbMask};

/// Pixel-wise binary cross-entropy with the mask clamped to `[eps, 1 - eps]`. The gradient
/// vanishes where the clamp is active.
pub fn loss_ce(mask: &ProbMask, labels: &LabelMask, clamp_eps: f64) -> Result<TermLoss> {
    mask.grid().check_same_dims(labels.grid())?;
    if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
        return Err(Error::Config(format!(
            "clamp_eps must lie in (0, 0.5), got {clamp_eps}"
        )));
    }
    let (h, w) = mask.dims();
    let n = (h * w) as f64;
    let lo = clamp_eps;
    let hi = 1.0 - clamp_eps;
    let mut sum = 0.0;
    let mut grad = Grid2D::zeros(h, w);
    for (idx, g) in grad.values_mut().iter_mut().enumerate() {
        let raw = mask.values()[idx];
        let y = labels.values()[idx];
        let m = raw.clamp(lo, hi);
        sum += y * m.ln() + (1.0 - y) * (1.0 - m).ln();
        if (lo..=hi).contains(&raw) {
            *g = (m - y) / (m * (1.0 - m)) / n;
        }
    }
    Ok(TermLoss {
        value: -sum / n,
        grad,
    })
}
