//! Gradient-descent training of [`ToySegmenter`] against the composite objective.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::ProbMask;
use crate::lipschitz::{estimate_lipschitz, LipschitzProbe};
use crate::losses::{
    hsv_param_gradient, loss_robust, HsvPriorParams, LossBundle, LossConfig, Term,
};
use crate::metrics::{evaluate, rho_correlation, variance, Metrics, Rho};
use crate::model::{FeatureStack, ToySegmenter, FEATURE_COUNT};
use crate::synth::{Dataset, Scene};

/// Loss magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub sigma_bw: f64,
    /// Reference water colour for the confidence weights; `None` uses the mean HSV of
    /// labeled water pixels in the training split.
    pub ref_hsv: Option<[f64; 3]>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Scenes per update; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Standard deviation of the initial theta.
    pub init_scale: f64,
    /// Trailing epochs used for the validation-IoU variance.
    pub variance_window: usize,
    pub eval_threshold: f64,
    /// Mask pairs for the post-training Lipschitz probe; 0 skips it.
    pub lipschitz_trials: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            sigma_bw: 0.2,
            ref_hsv: None,
            learning_rate: 2.0,
            epochs: 120,
            batch_size: 0,
            seed: 7,
            init_scale: 0.01,
            variance_window: 20,
            eval_threshold: 0.5,
            lipschitz_trials: 200,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.variance_window == 0 {
            return Err(Error::Config("variance_window must be >= 1".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config("init_scale must be >= 0".into()));
        }
        crate::losses::check_unit_open("eval_threshold", self.eval_threshold)?;
        self.initial_hsv_params([0.5, 0.5, 0.5]).validate()
    }

    fn initial_hsv_params(&self, ref_hsv: [f64; 3]) -> HsvPriorParams {
        HsvPriorParams {
            sigma_bw: self.sigma_bw,
            ref_hsv: self.ref_hsv.unwrap_or(ref_hsv),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_robust: f64,
    pub loss_ce: f64,
    pub loss_hsv: f64,
    pub loss_coast: f64,
    pub loss_conn: f64,
    pub loss_sea: f64,
    /// Composite with the soft connectivity surrogate.
    pub loss_smooth: f64,
    /// Norm of the parameter gradient averaged over the epoch's updates.
    pub grad_norm: f64,
    /// Running minimum of `grad_norm`.
    pub min_grad_norm: f64,
    pub val_iou: f64,
    pub val_f1: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSummary {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub final_metrics: Metrics,
    /// Population variance of validation IoU over the trailing window.
    pub late_iou_variance: f64,
    pub variance_window: usize,
    pub min_grad_norm: f64,
    /// `NaN` when the probe was skipped.
    pub lipschitz: f64,
    pub rho: Rho,
    pub ref_hsv: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub summary: TrainSummary,
}

impl TrainReport {
    pub fn val_iou(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_iou).collect()
    }
}

/// Mean HSV of labeled water pixels, hue averaged on the circle.
pub fn mean_water_hsv<'a>(scenes: impl IntoIterator<Item = &'a Scene>) -> Option<[f64; 3]> {
    let (mut cs, mut sn, mut s, mut v, mut n) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for scene in scenes {
        let (h, w) = scene.labels.dims();
        for i in 0..h {
            for j in 0..w {
                if scene.labels.get(i, j) == 1.0 {
                    let [ph, ps, pv] = scene.hsv.pixel(i, j);
                    let angle = ph * std::f64::consts::TAU;
                    cs += angle.cos();
                    sn += angle.sin();
                    s += ps;
                    v += pv;
                    n += 1;
                }
            }
        }
    }
    if n == 0 {
        return None;
    }
    let mut hue = sn.atan2(cs) / std::f64::consts::TAU;
    hue = hue.rem_euclid(1.0);
    if hue >= 1.0 {
        hue = 0.0;
    }
    Some([hue, s / n as f64, v / n as f64])
}

pub(crate) struct Prepared<'a> {
    pub scene: &'a Scene,
    pub features: FeatureStack,
}

pub(crate) fn prepare(scene: &Scene) -> Prepared<'_> {
    Prepared {
        scene,
        features: FeatureStack::new(&scene.image, &scene.hsv),
    }
}

/// Forward pass, loss bundle, and the gradient with respect to all trainable parameters.
pub(crate) fn scene_gradient(
    model: &ToySegmenter,
    p: &Prepared<'_>,
    cfg: &LossConfig,
) -> Result<(ProbMask, LossBundle, Vec<f64>)> {
    let mask = model.predict_features(&p.features);
    let bundle = loss_robust(&mask, &p.scene.labels, &p.scene.hsv, &model.hsv_params, cfg)?;
    let mut grad = model
        .theta_gradient(&p.features, &mask, &bundle.grad)
        .to_vec();
    let lambda_hsv = cfg.weights.hsv;
    if lambda_hsv != 0.0 {
        let g = hsv_param_gradient(&mask, &p.scene.hsv, &model.hsv_params);
        grad.extend(g.iter().map(|x| lambda_hsv * x));
    } else {
        grad.extend([0.0; 4]);
    }
    Ok((mask, bundle, grad))
}

fn check_finite(epoch: usize, b: &LossBundle) -> Result<()> {
    for t in Term::ALL {
        let v = b.term(t);
        if !v.is_finite() {
            return Err(Error::Divergence {
                epoch,
                term: t.name(),
                value: v,
            });
        }
    }
    if !b.l_robust.is_finite() || b.l_robust.abs() > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            epoch,
            term: "robust",
            value: b.l_robust,
        });
    }
    Ok(())
}

fn validation_metrics(
    model: &ToySegmenter,
    val: &[Prepared<'_>],
    threshold: f64,
) -> Result<Metrics> {
    if val.is_empty() {
        return Ok(Metrics {
            iou: f64::NAN,
            f1: f64::NAN,
            accuracy: f64::NAN,
        });
    }
    let mut acc = [0.0; 3];
    for p in val {
        let m = evaluate(
            &model.predict_features(&p.features),
            &p.scene.labels,
            threshold,
        )?;
        acc[0] += m.iou;
        acc[1] += m.f1;
        acc[2] += m.accuracy;
    }
    let n = val.len() as f64;
    Ok(Metrics {
        iou: acc[0] / n,
        f1: acc[1] / n,
        accuracy: acc[2] / n,
    })
}

/// Trains a fresh model. Deterministic in `(dataset, config)`.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(ToySegmenter, TrainReport)> {
    config.validate()?;
    let ref_hsv = match config.ref_hsv {
        Some(r) => r,
        None => mean_water_hsv(dataset.train_scenes()).ok_or_else(|| {
            Error::Config("training split holds no water pixels to derive ref_hsv".into())
        })?,
    };
    let mut model = ToySegmenter::random(
        config.seed,
        config.init_scale,
        config.initial_hsv_params(ref_hsv),
    );
    let train_set: Vec<Prepared<'_>> = dataset.train_scenes().map(prepare).collect();
    let val_set: Vec<Prepared<'_>> = dataset.validation_scenes().map(prepare).collect();

    let n_params = FEATURE_COUNT + 4;
    let batch = if config.batch_size == 0 {
        train_set.len()
    } else {
        config.batch_size.min(train_set.len())
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(config.epochs);
    let mut min_grad = f64::INFINITY;

    for epoch in 1..=config.epochs {
        if batch < train_set.len() {
            order.shuffle(&mut rng);
        }
        let mut sums = [0.0; 7];
        let mut epoch_grad = vec![0.0; n_params];
        let n_batches = order.len().div_ceil(batch);
        for chunk in order.chunks(batch) {
            let mut grad = vec![0.0; n_params];
            for &idx in chunk {
                let (_, bundle, g) = scene_gradient(&model, &train_set[idx], &config.loss)?;
                check_finite(epoch, &bundle)?;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
                let vals = [
                    bundle.l_robust,
                    bundle.l_ce,
                    bundle.l_hsv,
                    bundle.l_coast,
                    bundle.l_conn,
                    bundle.l_sea,
                    bundle.l_smooth,
                ];
                for (s, v) in sums.iter_mut().zip(vals) {
                    *s += v;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            let mut params = model.parameters();
            for ((p, g), eg) in params.iter_mut().zip(&grad).zip(epoch_grad.iter_mut()) {
                let g = g * scale;
                *p -= config.learning_rate * g;
                *eg += g / n_batches as f64;
            }
            if let Some(bad) = params.iter().find(|p| !p.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    term: "parameters",
                    value: *bad,
                });
            }
            model.set_parameters(&params);
        }
        let n = train_set.len() as f64;
        let grad_norm = epoch_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        min_grad = min_grad.min(grad_norm);
        let val = validation_metrics(&model, &val_set, config.eval_threshold)?;
        records.push(EpochRecord {
            epoch,
            loss_robust: sums[0] / n,
            loss_ce: sums[1] / n,
            loss_hsv: sums[2] / n,
            loss_coast: sums[3] / n,
            loss_conn: sums[4] / n,
            loss_sea: sums[5] / n,
            loss_smooth: sums[6] / n,
            grad_norm,
            min_grad_norm: min_grad,
            val_iou: val.iou,
            val_f1: val.f1,
            val_accuracy: val.accuracy,
        });
    }

    let final_metrics = validation_metrics(&model, &val_set, config.eval_threshold)?;
    let window = config.variance_window.min(records.len());
    let tail: Vec<f64> = records[records.len() - window..]
        .iter()
        .map(|r| r.val_iou)
        .collect();
    let lipschitz = if config.lipschitz_trials == 0 {
        f64::NAN
    } else {
        let probe_scene = train_set[0].scene;
        let probe = LipschitzProbe::new(
            &probe_scene.labels,
            &probe_scene.hsv,
            model.hsv_params,
            config.loss,
        );
        estimate_lipschitz(&probe, config.lipschitz_trials, config.seed)?.estimate
    };
    let summary = TrainSummary {
        epochs: records.len(),
        learning_rate: config.learning_rate,
        seed: config.seed,
        final_metrics,
        late_iou_variance: variance(&tail),
        variance_window: window,
        min_grad_norm: min_grad,
        lipschitz,
        rho: rho_correlation(&dataset.scenes, &model.hsv_params),
        ref_hsv,
    };
    Ok((
        model,
        TrainReport {
            epochs: records,
            summary,
        },
    ))
}

/// Retries [`train`] with the learning rate halved after each divergence, at most
/// `max_halvings` times.
pub fn train_with_backoff(
    dataset: &Dataset,
    config: &TrainConfig,
    max_halvings: usize,
) -> Result<(ToySegmenter, TrainReport)> {
    let mut cfg = *config;
    let mut attempt = 0;
    loop {
        match train(dataset, &cfg) {
            Err(Error::Divergence { .. }) if attempt < max_halvings => {
                cfg.learning_rate *= 0.5;
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// True when no step of `values` rises by more than `slack`.
pub fn is_non_increasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Full-batch training with the learning rate halved, starting from `config.learning_rate`,
/// until the per-epoch training objective (`loss_smooth`, the function whose gradient drives
/// the updates) never increases by more than `slack`. Divergence also triggers a halving.
pub fn find_descent_rate(
    dataset: &Dataset,
    config: &TrainConfig,
    max_halvings: usize,
    slack: f64,
) -> Result<(f64, ToySegmenter, TrainReport)> {
    let mut cfg = TrainConfig {
        batch_size: 0,
        ..*config
    };
    for _ in 0..=max_halvings {
        match train(dataset, &cfg) {
            Ok((model, report)) => {
                let losses: Vec<f64> = report.epochs.iter().map(|e| e.loss_smooth).collect();
                if is_non_increasing(&losses, slack) {
                    return Ok((cfg.learning_rate, model, report));
                }
            }
            Err(Error::Divergence { .. }) => {}
            Err(e) => return Err(e),
        }
        cfg.learning_rate *= 0.5;
    }
    Err(Error::Config(format!(
        "no descent-safe learning rate within {max_halvings} halvings of {}",
        config.learning_rate
    )))
}
