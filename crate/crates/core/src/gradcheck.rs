//! Central finite-difference verification of the analytic gradients.
//!
//! Coastline and sea sets are captured once from the unperturbed mask and held fixed while
//! probing; the connectivity term is checked through its soft surrogate, which is the function
//! its gradient belongs to.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{HsvImage, LabelMask, ProbMask};
use crate::losses::robust::term_losses;
use crate::losses::{hsv_param_gradient, FrozenSets, HsvPriorParams, LossConfig, Term, TermLoss};
use crate::model::{FeatureStack, ToySegmenter, FEATURE_COUNT};
use crate::synth::{generate, Scene, SceneSpec, ShapeFamily};
use crate::train::mean_water_hsv;

/// Largest absolute logit of a [`random_instance`] prediction.
pub const MAX_LOGIT: f64 = 4.0;

/// Below this gradient scale the error is reported in absolute terms.
pub const ABSOLUTE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    pub terms: Vec<Term>,
    pub composite: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-5,
            terms: Term::ALL.to_vec(),
            composite: true,
        }
    }
}

/// `max|a - n| / max(max|a|, max|n|)`, or the absolute difference when both gradients are
/// below [`ABSOLUTE_FLOOR`].
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if scale < ABSOLUTE_FLOOR {
        diff
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermCheck {
    /// Term name or `composite`.
    pub name: String,
    pub mask_error: f64,
    /// `None` for mask-only checks.
    pub param_error: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub checks: Vec<TermCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn worst(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.mask_error.max(c.param_error.unwrap_or(0.0)))
            .fold(0.0, f64::max)
    }

    /// Fails with the names of all terms over tolerance.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::GradCheck(self.failures()))
        }
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{:<10} dL/dM {:.3e}", c.name, c.mask_error)?;
            if let Some(p) = c.param_error {
                write!(f, "  dL/dtheta {p:.3e}")?;
            }
            writeln!(f, "  {}", if c.passed { "PASS" } else { "FAIL" })?;
        }
        write!(
            f,
            "tolerance {:.1e}: {}",
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

struct Problem<'a> {
    labels: &'a LabelMask,
    hsv: &'a HsvImage,
    cfg: &'a LossConfig,
    frozen: FrozenSets,
}

impl Problem<'_> {
    fn terms(&self, mask: &ProbMask, params: &HsvPriorParams) -> Result<[TermLoss; 5]> {
        term_losses(mask, self.labels, self.hsv, params, self.cfg, &self.frozen)
    }

    /// Values of the selected terms followed by the composite.
    fn values(
        &self,
        mask: &ProbMask,
        params: &HsvPriorParams,
        opts: &GradCheckOptions,
    ) -> Result<Vec<f64>> {
        let terms = self.terms(mask, params)?;
        let mut out: Vec<f64> = opts
            .terms
            .iter()
            .map(|&t| terms[t as usize].value)
            .collect();
        if opts.composite {
            out.push(self.composite_value(&terms));
        }
        Ok(out)
    }

    fn composite_value(&self, terms: &[TermLoss; 5]) -> f64 {
        Term::ALL
            .iter()
            .filter(|&&t| self.cfg.weights.get(t) != 0.0)
            .map(|&t| self.cfg.weights.get(t) * terms[t as usize].value)
            .sum()
    }

    /// Analytic mask gradients for the selected terms and the composite.
    fn mask_grads(
        &self,
        mask: &ProbMask,
        params: &HsvPriorParams,
        opts: &GradCheckOptions,
    ) -> Result<Vec<Vec<f64>>> {
        let terms = self.terms(mask, params)?;
        let mut out: Vec<Vec<f64>> = opts
            .terms
            .iter()
            .map(|&t| terms[t as usize].grad.values().to_vec())
            .collect();
        if opts.composite {
            let mut g = vec![0.0; mask.values().len()];
            for t in Term::ALL {
                let l = self.cfg.weights.get(t);
                if l != 0.0 {
                    for (a, b) in g.iter_mut().zip(terms[t as usize].grad.values()) {
                        *a += l * b;
                    }
                }
            }
            out.push(g);
        }
        Ok(out)
    }
}

fn numeric_mask_grads(
    p: &Problem<'_>,
    mask: &ProbMask,
    params: &HsvPriorParams,
    opts: &GradCheckOptions,
) -> Result<Vec<Vec<f64>>> {
    let n_out = opts.terms.len() + usize::from(opts.composite);
    let n = mask.values().len();
    let mut out = vec![vec![0.0; n]; n_out];
    for k in 0..n {
        let mut plus = mask.grid().clone();
        plus.values_mut()[k] += opts.step;
        let mut minus = mask.grid().clone();
        minus.values_mut()[k] -= opts.step;
        let fp = p.values(&ProbMask::new(plus)?, params, opts)?;
        let fm = p.values(&ProbMask::new(minus)?, params, opts)?;
        for (o, (a, b)) in out.iter_mut().zip(fp.iter().zip(&fm)) {
            o[k] = (a - b) / (2.0 * opts.step);
        }
    }
    Ok(out)
}

fn names(opts: &GradCheckOptions) -> Vec<String> {
    let mut v: Vec<String> = opts.terms.iter().map(|t| t.name().to_string()).collect();
    if opts.composite {
        v.push("composite".into());
    }
    v
}

fn validate(opts: &GradCheckOptions) -> Result<()> {
    if !(opts.step > 0.0 && opts.tolerance > 0.0) {
        return Err(Error::Config("step and tolerance must be positive".into()));
    }
    if opts.terms.is_empty() && !opts.composite {
        return Err(Error::Config("nothing to check".into()));
    }
    Ok(())
}

/// Checks `dL/dM` for a given mask.
pub fn gradcheck_mask(
    mask: &ProbMask,
    labels: &LabelMask,
    hsv: &HsvImage,
    params: &HsvPriorParams,
    cfg: &LossConfig,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    validate(opts)?;
    cfg.validate_settings()?;
    let problem = Problem {
        labels,
        hsv,
        cfg,
        frozen: FrozenSets::compute(mask, cfg)?,
    };
    let analytic = problem.mask_grads(mask, params, opts)?;
    let numeric = numeric_mask_grads(&problem, mask, params, opts)?;
    let checks = names(opts)
        .into_iter()
        .zip(analytic.iter().zip(&numeric))
        .map(|(name, (a, n))| {
            let mask_error = max_relative_error(a, n);
            TermCheck {
                name,
                mask_error,
                param_error: None,
                passed: mask_error < opts.tolerance,
            }
        })
        .collect();
    Ok(GradCheckReport {
        tolerance: opts.tolerance,
        checks,
    })
}

/// Checks `dL/dM` at the model's prediction and `dL/d(theta, alpha, beta)` through the
/// model, for every selected term and the composite.
pub fn gradcheck(
    model: &ToySegmenter,
    scene: &Scene,
    cfg: &LossConfig,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    validate(opts)?;
    cfg.validate_settings()?;
    let (h, w) = scene.labels.dims();
    if h > 12 || w > 12 {
        return Err(Error::Config(format!(
            "gradcheck instances are limited to 12x12, got {h}x{w}"
        )));
    }
    let features = FeatureStack::new(&scene.image, &scene.hsv);
    let mask = model.predict_features(&features);
    let problem = Problem {
        labels: &scene.labels,
        hsv: &scene.hsv,
        cfg,
        frozen: FrozenSets::compute(&mask, cfg)?,
    };
    let params = model.hsv_params;

    let analytic_mask = problem.mask_grads(&mask, &params, opts)?;
    let numeric_mask = numeric_mask_grads(&problem, &mask, &params, opts)?;

    // Parameter gradients by the chain rule.
    let hsv_grad = hsv_param_gradient(&mask, &scene.hsv, &params);
    let mut analytic_params: Vec<Vec<f64>> = Vec::new();
    let mut push_param = |dl_dm: &[f64], hsv_weight: f64| {
        let grid = crate::grid::Grid2D::new(h, w, dl_dm.to_vec()).expect("mask-shaped gradient");
        let mut g = model.theta_gradient(&features, &mask, &grid).to_vec();
        g.extend(hsv_grad.iter().map(|x| hsv_weight * x));
        analytic_params.push(g);
    };
    for (&t, g) in opts.terms.iter().zip(&analytic_mask) {
        push_param(g, if t == Term::Hsv { 1.0 } else { 0.0 });
    }
    if opts.composite {
        push_param(
            analytic_mask.last().expect("composite entry"),
            cfg.weights.hsv,
        );
    }

    let base = model.parameters();
    let n_out = analytic_mask.len();
    let mut numeric_params = vec![vec![0.0; base.len()]; n_out];
    for k in 0..base.len() {
        let eval = |delta: f64| -> Result<Vec<f64>> {
            let mut m = model.clone();
            let mut p = base.clone();
            p[k] += delta;
            m.set_parameters(&p);
            let mask = m.predict_features(&features);
            problem.values(&mask, &m.hsv_params, opts)
        };
        let fp = eval(opts.step)?;
        let fm = eval(-opts.step)?;
        for (o, (a, b)) in numeric_params.iter_mut().zip(fp.iter().zip(&fm)) {
            o[k] = (a - b) / (2.0 * opts.step);
        }
    }

    let checks = names(opts)
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let mask_error = max_relative_error(&analytic_mask[i], &numeric_mask[i]);
            let param_error = max_relative_error(&analytic_params[i], &numeric_params[i]);
            TermCheck {
                name,
                mask_error,
                param_error: Some(param_error),
                passed: mask_error < opts.tolerance && param_error < opts.tolerance,
            }
        })
        .collect();
    Ok(GradCheckReport {
        tolerance: opts.tolerance,
        checks,
    })
}

/// A seeded `size x size` scene and a model with spread-out predictions, so that the
/// coastline and sea sets are non-trivial.
pub fn random_instance(seed: u64, size: usize) -> Result<(ToySegmenter, Scene)> {
    let family = ShapeFamily::ALL[(seed % 4) as usize];
    let mut spec = SceneSpec::sample(family, size, size, seed);
    let (image, labels) = match generate(&spec) {
        Err(Error::DegenerateScene(_)) => {
            spec.base_level = 0.5;
            spec.waves.clear();
            spec.raggedness = 0.0;
            generate(&spec)?
        }
        other => other?,
    };
    let scene = Scene::new(0, seed, family, image, labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let ref_hsv = mean_water_hsv([&scene]).unwrap_or(spec.water_hsv);
    let params = HsvPriorParams {
        alpha_h: normal.sample(&mut rng),
        alpha_s: normal.sample(&mut rng),
        alpha_v: normal.sample(&mut rng),
        beta: normal.sample(&mut rng),
        sigma_bw: 0.2,
        ref_hsv,
    };
    // Water-vs-land direction in feature space plus noise keeps predictions mixed.
    let mut theta = [0.0; FEATURE_COUNT];
    for t in theta.iter_mut() {
        *t = 2.0 * normal.sample(&mut rng);
    }
    // Keep every logit within +-MAX_LOGIT: near-saturated predictions make the clamped
    // cross-entropy too curved for step-1e-5 central differences.
    let features = FeatureStack::new(&scene.image, &scene.hsv);
    // Centre the bias on the median logit so predictions straddle 0.5 and the coastline and
    // sea sets are non-empty.
    let mut logits: Vec<f64> = features
        .iter()
        .map(|phi| ToySegmenter::new(theta, params).logit(phi))
        .collect();
    logits.sort_by(f64::total_cmp);
    theta[FEATURE_COUNT - 1] -= logits[logits.len() / 2];
    let probe = ToySegmenter::new(theta, params);
    let peak = features
        .iter()
        .map(|phi| probe.logit(phi).abs())
        .fold(0.0, f64::max);
    if peak > MAX_LOGIT {
        for t in theta.iter_mut() {
            *t *= MAX_LOGIT / peak;
        }
    }
    Ok((ToySegmenter::new(theta, params), scene))
}

/// Loss settings used for gradient checks on small instances.
pub fn instance_loss_config(weights: crate::losses::LossWeights) -> LossConfig {
    LossConfig {
        weights,
        sea_min_area: 4,
        sea_window: 3,
        ..LossConfig::default()
    }
}
