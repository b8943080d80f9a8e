use super::{sigmoid, HsvPriorParams, TermLoss};
use crate::error::Result;
use crate::grid::{Grid2D, HsvImage, ProbMask};

/// `P = sigmoid(alpha_h*H + alpha_s*S + alpha_v*V + beta)` per pixel.
pub fn hsv_water_likelihood(hsv: &HsvImage, params: &HsvPriorParams) -> ProbMask {
    let (h, w) = hsv.dims();
    ProbMask::clamped(Grid2D::from_fn(h, w, |i, j| {
        let [ph, ps, pv] = hsv.pixel(i, j);
        sigmoid(params.alpha_h * ph + params.alpha_s * ps + params.alpha_v * pv + params.beta)
    }))
}

#[inline]
fn circular_hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Gaussian confidence `exp(-d^2 / (2 sigma^2))` of the HSV distance to `params.ref_hsv`.
pub fn hsv_confidence_weights(hsv: &HsvImage, params: &HsvPriorParams) -> Grid2D {
    let (h, w) = hsv.dims();
    let [rh, rs, rv] = params.ref_hsv;
    let two_sigma_sq = 2.0 * params.sigma_bw * params.sigma_bw;
    Grid2D::from_fn(h, w, |i, j| {
        let [ph, ps, pv] = hsv.pixel(i, j);
        let dh = circular_hue_distance(ph, rh);
        let d2 = dh * dh + (ps - rs).powi(2) + (pv - rv).powi(2);
        (-d2 / two_sigma_sq).exp()
    })
}

/// Weighted squared deviation of the mask from a precomputed likelihood `p` with weights `w`.
pub fn loss_hsv_precomputed(mask: &ProbMask, p: &ProbMask, w: &Grid2D) -> TermLoss {
    let (h, wd) = mask.dims();
    let n = (h * wd) as f64;
    let mut value = 0.0;
    let mut grad = Grid2D::zeros(h, wd);
    for (idx, g) in grad.values_mut().iter_mut().enumerate() {
        let diff = mask.values()[idx] - p.values()[idx];
        let wi = w.values()[idx];
        value += diff * diff * wi;
        *g = 2.0 * diff * wi / n;
    }
    TermLoss {
        value: value / n,
        grad,
    }
}

pub fn loss_hsv(mask: &ProbMask, hsv: &HsvImage, params: &HsvPriorParams) -> Result<TermLoss> {
    mask.grid().check_same_dims(hsv.h())?;
    let p = hsv_water_likelihood(hsv, params);
    let w = hsv_confidence_weights(hsv, params);
    Ok(loss_hsv_precomputed(mask, &p, &w))
}

/// `dL_hsv / d(alpha_h, alpha_s, alpha_v, beta)` with the weights held fixed.
pub fn hsv_param_gradient(mask: &ProbMask, hsv: &HsvImage, params: &HsvPriorParams) -> [f64; 4] {
    let p = hsv_water_likelihood(hsv, params);
    let w = hsv_confidence_weights(hsv, params);
    let (h, wd) = mask.dims();
    let n = (h * wd) as f64;
    let mut out = [0.0; 4];
    for i in 0..h {
        for j in 0..wd {
            let pij = p.get(i, j);
            let dz = -2.0 * (mask.get(i, j) - pij) * w.get(i, j) / n * pij * (1.0 - pij);
            let [ph, ps, pv] = hsv.pixel(i, j);
            out[0] += dz * ph;
            out[1] += dz * ps;
            out[2] += dz * pv;
            out[3] += dz;
        }
    }
    out
}
