//! Per-pixel logistic segmenter over thirteen hand-built features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::color::rgb_to_hsv;
use crate::filters::clipped;
use crate::grid::{Grid2D, HsvImage, ProbMask, RgbImage};
use crate::losses::{sigmoid, HsvPriorParams};

pub const FEATURE_COUNT: usize = 13;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "r", "g", "b", "h", "s", "v", "mean_r", "mean_g", "mean_b", "mean_h", "mean_s", "mean_v",
    "bias",
];

/// Per-pixel features: r, g, b, h, s, v, their 3x3 (border-clipped) local means, and a
/// constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    height: usize,
    width: usize,
    features: Vec<[f64; FEATURE_COUNT]>,
}

impl FeatureStack {
    pub fn new(image: &RgbImage, hsv: &HsvImage) -> Self {
        let (height, width) = image.dims();
        let channels: [&Grid2D; 6] = [image.r(), image.g(), image.b(), hsv.h(), hsv.s(), hsv.v()];
        let mut features = Vec::with_capacity(height * width);
        for i in 0..height {
            let (r0, r1) = clipped(i, 1, height);
            for j in 0..width {
                let (c0, c1) = clipped(j, 1, width);
                let n = ((r1 - r0) * (c1 - c0)) as f64;
                let mut f = [0.0; FEATURE_COUNT];
                for (k, ch) in channels.iter().enumerate() {
                    f[k] = ch.get(i, j);
                    let mut s = 0.0;
                    for r in r0..r1 {
                        for c in c0..c1 {
                            s += ch.get(r, c);
                        }
                    }
                    f[6 + k] = s / n;
                }
                f[FEATURE_COUNT - 1] = 1.0;
                features.push(f);
            }
        }
        Self {
            height,
            width,
            features,
        }
    }

    pub fn from_image(image: &RgbImage) -> Self {
        Self::new(image, &rgb_to_hsv(image))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64; FEATURE_COUNT] {
        &self.features[row * self.width + col]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64; FEATURE_COUNT]> {
        self.features.iter()
    }
}

/// `m(i,j) = sigmoid(theta . phi(i,j))` plus the jointly trained HSV prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySegmenter {
    pub theta: [f64; FEATURE_COUNT],
    pub hsv_params: HsvPriorParams,
}

impl ToySegmenter {
    pub fn new(theta: [f64; FEATURE_COUNT], hsv_params: HsvPriorParams) -> Self {
        Self { theta, hsv_params }
    }

    /// Weights drawn from `N(0, scale^2)`.
    pub fn random(seed: u64, scale: f64, hsv_params: HsvPriorParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale).expect("finite scale");
        let mut theta = [0.0; FEATURE_COUNT];
        for t in &mut theta {
            *t = normal.sample(&mut rng);
        }
        Self { theta, hsv_params }
    }

    #[inline]
    pub fn logit(&self, phi: &[f64; FEATURE_COUNT]) -> f64 {
        self.theta.iter().zip(phi).map(|(a, b)| a * b).sum()
    }

    pub fn predict_features(&self, features: &FeatureStack) -> ProbMask {
        let (h, w) = features.dims();
        ProbMask::clamped(
            Grid2D::new(
                h,
                w,
                features
                    .iter()
                    .map(|phi| sigmoid(self.logit(phi)))
                    .collect(),
            )
            .expect("feature grid is non-empty"),
        )
    }

    /// Trainable parameters: theta followed by `(alpha_h, alpha_s, alpha_v, beta)`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.theta.to_vec();
        p.extend(self.hsv_params.coefficients());
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        assert_eq!(p.len(), FEATURE_COUNT + 4);
        self.theta.copy_from_slice(&p[..FEATURE_COUNT]);
        self.hsv_params.set_coefficients([
            p[FEATURE_COUNT],
            p[FEATURE_COUNT + 1],
            p[FEATURE_COUNT + 2],
            p[FEATURE_COUNT + 3],
        ]);
    }

    /// Chain rule from `dL/dM` to `dL/dtheta` through the sigmoid.
    pub fn theta_gradient(
        &self,
        features: &FeatureStack,
        mask: &ProbMask,
        dl_dm: &Grid2D,
    ) -> [f64; FEATURE_COUNT] {
        let mut g = [0.0; FEATURE_COUNT];
        for ((phi, &m), &d) in features.iter().zip(mask.values()).zip(dl_dm.values()) {
            let dz = d * m * (1.0 - m);
            if dz == 0.0 {
                continue;
            }
            for (gk, fk) in g.iter_mut().zip(phi) {
                *gk += dz * fk;
            }
        }
        g
    }
}

pub fn predict(model: &ToySegmenter, image: &RgbImage) -> ProbMask {
    model.predict_features(&FeatureStack::from_image(image))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image() -> RgbImage {
        RgbImage::from_fn(2, 2, |i, j| {
            [
                0.1 + 0.2 * i as f64,
                0.3 + 0.1 * j as f64,
                0.8 - 0.3 * (i * j) as f64,
            ]
        })
        .unwrap()
    }

    #[test]
    fn zero_weights_predict_half() {
        let m = predict(
            &ToySegmenter::new([0.0; FEATURE_COUNT], Default::default()),
            &image(),
        );
        assert!(m.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn saturated_bias() {
        let mut theta = [0.0; FEATURE_COUNT];
        theta[FEATURE_COUNT - 1] = 50.0;
        let m = predict(&ToySegmenter::new(theta, Default::default()), &image());
        assert!(m.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn matches_scalar_oracle() {
        let img = image();
        let model = ToySegmenter::random(17, 1.0, Default::default());
        let mask = predict(&model, &img);
        let hsv = rgb_to_hsv(&img);
        // On a 2x2 image every clipped 3x3 window covers all four pixels.
        let mean = |g: &Grid2D| g.values().iter().sum::<f64>() / 4.0;
        for i in 0..2 {
            for j in 0..2 {
                let [r, g, b] = img.pixel(i, j);
                let [h, s, v] = hsv.pixel(i, j);
                let phi = [
                    r,
                    g,
                    b,
                    h,
                    s,
                    v,
                    mean(img.r()),
                    mean(img.g()),
                    mean(img.b()),
                    mean(hsv.h()),
                    mean(hsv.s()),
                    mean(hsv.v()),
                    1.0,
                ];
                let z: f64 = model.theta.iter().zip(phi).map(|(a, b)| a * b).sum();
                let expected = 1.0 / (1.0 + (-z).exp());
                assert!((mask.get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn parameter_vector_round_trip() {
        let mut model = ToySegmenter::random(1, 0.5, Default::default());
        let mut p = model.parameters();
        p[15] = 3.0;
        model.set_parameters(&p);
        assert_eq!(model.hsv_params.alpha_v, 3.0);
        assert_eq!(model.parameters(), p);
    }
}
