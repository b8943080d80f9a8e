//! Command bodies. Each takes fully resolved settings plus an output directory, so a manifest
//! can replay it.

use std::path::Path;

use anyhow::{Context, Result};
use coastseg::ablation::ablate;
use coastseg::gradcheck::{gradcheck, instance_loss_config, random_instance, GradCheckOptions};
use coastseg::losses::{LossWeights, Term};
use coastseg::metrics::{evaluate, MeanStd};
use coastseg::model::predict;
use coastseg::morphology::BinaryMask;
use coastseg::netpbm;
use coastseg::postprocess::{count_false_components, refine, PostprocConfig};
use coastseg::synth::{make_benchmark_with, BenchmarkSpec, Split};
use coastseg::train::{train, EpochRecord, TrainReport};
use coastseg::{Error, LabelMask};
use serde::{Deserialize, Serialize};

use crate::config::{FlatConfig, PostprocFlat};
use crate::manifest::Manifest;
use crate::store::{self, load_dataset, load_mask, save_dataset, write_csv, write_text};

/// What a command produced. `failure` carries a check that ran to completion but did not pass.
pub struct Outcome {
    pub manifest: Manifest,
    pub failure: Option<anyhow::Error>,
}

impl From<Manifest> for Outcome {
    fn from(manifest: Manifest) -> Self {
        Self {
            manifest,
            failure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSettings {
    pub count: usize,
    pub split: f64,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
}

pub fn synth(s: &SynthSettings, out: &Path) -> Result<Outcome> {
    let ds = make_benchmark_with(&BenchmarkSpec {
        count: s.count,
        split: s.split,
        seed: s.seed,
        height: s.height,
        width: s.width,
    })?;
    let mut m = Manifest::new("synth", s.seed, s)?;
    m.outputs = save_dataset(out, &ds)?;
    m.result("train_count", ds.train.len() as i64);
    m.result("validation_count", ds.validation.len() as i64);
    println!(
        "wrote {} scenes to {} ({} train / {} validation)",
        ds.scenes.len(),
        out.display(),
        ds.train.len(),
        ds.validation.len()
    );
    Ok(m.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub data: String,
    pub train: FlatConfig,
}

#[derive(Serialize)]
struct EpochRow {
    epoch: usize,
    loss_robust: f64,
    loss_ce: f64,
    loss_hsv: f64,
    loss_coast: f64,
    loss_conn: f64,
    loss_sea: f64,
    loss_smooth: f64,
    grad_norm: f64,
    min_grad_norm: f64,
    val_iou: f64,
    val_f1: f64,
    val_accuracy: f64,
}

impl From<&EpochRecord> for EpochRow {
    fn from(e: &EpochRecord) -> Self {
        Self {
            epoch: e.epoch,
            loss_robust: e.loss_robust,
            loss_ce: e.loss_ce,
            loss_hsv: e.loss_hsv,
            loss_coast: e.loss_coast,
            loss_conn: e.loss_conn,
            loss_sea: e.loss_sea,
            loss_smooth: e.loss_smooth,
            grad_norm: e.grad_norm,
            min_grad_norm: e.min_grad_norm,
            val_iou: e.val_iou,
            val_f1: e.val_f1,
            val_accuracy: e.val_accuracy,
        }
    }
}

#[derive(Serialize)]
struct SummaryFile {
    epochs: usize,
    learning_rate: f64,
    seed: u64,
    final_iou: f64,
    final_f1: f64,
    final_accuracy: f64,
    late_iou_variance: f64,
    variance_window: usize,
    min_grad_norm: f64,
    lipschitz: f64,
    rho: f64,
    rho_degenerate: bool,
    ref_hsv: [f64; 3],
}

fn write_report(path: &Path, report: &TrainReport) -> Result<()> {
    let rows: Vec<EpochRow> = report.epochs.iter().map(EpochRow::from).collect();
    write_csv(path, &rows)
}

pub fn train_cmd(s: &TrainSettings, out: &Path) -> Result<Outcome> {
    let cfg = s.train.to_train_config()?;
    let loaded = load_dataset(Path::new(&s.data))?;
    let (model, report) = train(&loaded.dataset, &cfg)?;
    store::save_model(&out.join("model.toml"), &model)?;
    write_report(&out.join("report.csv"), &report)?;
    let sm = &report.summary;
    let summary = SummaryFile {
        epochs: sm.epochs,
        learning_rate: sm.learning_rate,
        seed: sm.seed,
        final_iou: sm.final_metrics.iou,
        final_f1: sm.final_metrics.f1,
        final_accuracy: sm.final_metrics.accuracy,
        late_iou_variance: sm.late_iou_variance,
        variance_window: sm.variance_window,
        min_grad_norm: sm.min_grad_norm,
        lipschitz: sm.lipschitz,
        rho: sm.rho.rho,
        rho_degenerate: sm.rho.degenerate,
        ref_hsv: sm.ref_hsv,
    };
    write_text(&out.join("summary.txt"), &toml::to_string(&summary)?)?;
    write_text(&out.join("config.toml"), &s.train.to_toml())?;

    let mut m = Manifest::new("train", cfg.seed, s)?;
    m.inputs = vec![s.data.clone()];
    m.outputs = ["model.toml", "report.csv", "summary.txt", "config.toml"]
        .map(String::from)
        .to_vec();
    m.result("final_iou", sm.final_metrics.iou);
    m.result("late_iou_variance", sm.late_iou_variance);
    println!(
        "trained {} epochs: val IoU {:.4}, F1 {:.4}, acc {:.4}; late IoU variance {:.3e} over {} epochs",
        sm.epochs, sm.final_metrics.iou, sm.final_metrics.f1, sm.final_metrics.accuracy, sm.late_iou_variance, sm.variance_window
    );
    Ok(m.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Train,
    Validation,
    All,
}

impl EvalSplit {
    fn includes(self, split: Split) -> bool {
        match self {
            EvalSplit::All => true,
            EvalSplit::Train => split == Split::Train,
            EvalSplit::Validation => split == Split::Validation,
        }
    }

    fn name(self) -> &'static str {
        match self {
            EvalSplit::Train => "train",
            EvalSplit::Validation => "validation",
            EvalSplit::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub data: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<String>,
    pub split: EvalSplit,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postprocess: Option<PostprocFlat>,
    pub write_masks: bool,
}

#[derive(Serialize)]
struct MetricsRow {
    scene: String,
    split: String,
    iou: String,
    f1: String,
    accuracy: String,
    false_components: String,
}

pub fn eval(s: &EvalSettings, out: &Path) -> Result<Outcome> {
    if !(s.threshold > 0.0 && s.threshold < 1.0) {
        return Err(crate::config_error(format!(
            "threshold must lie in (0, 1), got {}",
            s.threshold
        )));
    }
    let loaded = load_dataset(Path::new(&s.data))?;
    let model = match (&s.model, &s.masks) {
        (Some(path), None) => Some(store::load_model(Path::new(path))?),
        (None, Some(_)) => None,
        _ => {
            return Err(crate::config_error(
                "eval needs exactly one of --model or --masks",
            ))
        }
    };
    let post: Option<PostprocConfig> = s.postprocess.map(Into::into);
    if let Some(p) = &post {
        p.validate()?;
    }

    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    let (mut ious, mut f1s, mut accs, mut falses) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (idx, scene) in loaded.dataset.scenes.iter().enumerate() {
        let split = loaded
            .dataset
            .split_of(idx)
            .expect("every scene is in a split");
        if !s.split.includes(split) {
            continue;
        }
        let stem = &loaded.stems[idx];
        let mask = match (&model, &s.masks) {
            (Some(m), _) => predict(m, &scene.image),
            (None, Some(dir)) => {
                let path = Path::new(dir).join(format!("{stem}.pgm"));
                let mask = load_mask(&path)?;
                mask.grid()
                    .check_same_dims(scene.labels.grid())
                    .with_context(|| format!("mask {}", path.display()))?;
                mask
            }
            (None, None) => unreachable!("checked above"),
        };
        let binary = match &post {
            Some(p) => refine(&mask, p)?,
            None => BinaryMask::threshold(&mask, s.threshold),
        };
        let metrics = evaluate(&binary.to_prob(), &scene.labels, 0.5)?;
        let false_components = count_false_components(&binary, &scene.labels)?;
        if s.write_masks {
            let rel = format!("masks/{stem}.pgm");
            let bytes = if post.is_some() {
                netpbm::encode_labels(&LabelMask::new(binary.grid().clone())?)
            } else {
                netpbm::encode_prob_mask(&mask)
            };
            store::write_bytes(&out.join(&rel), &bytes)?;
            outputs.push(rel);
        }
        rows.push(MetricsRow {
            scene: stem.clone(),
            split: split.name().into(),
            iou: metrics.iou.to_string(),
            f1: metrics.f1.to_string(),
            accuracy: metrics.accuracy.to_string(),
            false_components: false_components.to_string(),
        });
        ious.push(metrics.iou);
        f1s.push(metrics.f1);
        accs.push(metrics.accuracy);
        falses.push(false_components as f64);
    }
    if rows.is_empty() {
        return Err(crate::config_error(format!(
            "no scenes in split `{}`",
            s.split.name()
        )));
    }
    let agg = [&ious, &f1s, &accs, &falses].map(|v| MeanStd::of(v));
    rows.push(MetricsRow {
        scene: "mean ± std".into(),
        split: s.split.name().into(),
        iou: agg[0].to_string(),
        f1: agg[1].to_string(),
        accuracy: agg[2].to_string(),
        false_components: agg[3].to_string(),
    });
    write_csv(&out.join("metrics.csv"), &rows)?;
    outputs.insert(0, "metrics.csv".into());

    let mut m = Manifest::new("eval", 0, s)?;
    m.inputs = [Some(&s.data), s.model.as_ref(), s.masks.as_ref()]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    m.outputs = outputs;
    m.result("scenes", ious.len() as i64);
    m.result("iou", agg[0].to_string());
    m.result("f1", agg[1].to_string());
    m.result("accuracy", agg[2].to_string());
    println!(
        "{} scenes: IoU {}  F1 {}  Acc {}  false components {}",
        ious.len(),
        agg[0],
        agg[1],
        agg[2],
        agg[3]
    );
    Ok(m.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblateSettings {
    pub data: String,
    pub train: FlatConfig,
}

#[derive(Serialize)]
struct AblationCsvRow {
    config: String,
    seed: u64,
    lambda_ce: f64,
    lambda_hsv: f64,
    lambda_coast: f64,
    lambda_conn: f64,
    lambda_sea: f64,
    final_iou: f64,
    iou_variance: f64,
    delta: f64,
}

pub fn ablate_cmd(s: &AblateSettings, out: &Path) -> Result<Outcome> {
    let cfg = s.train.to_train_config()?;
    let loaded = load_dataset(Path::new(&s.data))?;
    let (table, reports) = ablate(&loaded.dataset, &cfg)?;
    let rows: Vec<AblationCsvRow> = table
        .rows
        .iter()
        .map(|r| AblationCsvRow {
            config: r.name.clone(),
            seed: r.seed,
            lambda_ce: r.weights.ce,
            lambda_hsv: r.weights.hsv,
            lambda_coast: r.weights.coast,
            lambda_conn: r.weights.conn,
            lambda_sea: r.weights.sea,
            final_iou: r.final_iou,
            iou_variance: r.iou_variance,
            delta: r.delta,
        })
        .collect();
    write_csv(&out.join("ablation.csv"), &rows)?;
    let mut outputs = vec!["ablation.csv".to_string()];
    for (row, report) in table.rows.iter().zip(&reports) {
        let rel = format!("reports/{}.csv", row.name);
        write_report(&out.join(&rel), report)?;
        outputs.push(rel);
    }
    let mut m = Manifest::new("ablate", cfg.seed, s)?;
    m.inputs = vec![s.data.clone()];
    m.outputs = outputs;
    println!(
        "{:<8} {:>8} {:>12} {:>9}",
        "config", "IoU", "IoU var", "delta"
    );
    for r in &table.rows {
        println!(
            "{:<8} {:>8.4} {:>12.3e} {:>9.4}",
            r.name, r.final_iou, r.iou_variance, r.delta
        );
    }
    Ok(m.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSettings {
    pub size: usize,
    pub instances: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub step: f64,
    /// Empty means every term plus the composite.
    pub terms: Vec<String>,
}

#[derive(Serialize)]
struct GradcheckRow {
    instance: u64,
    term: String,
    mask_error: f64,
    param_error: f64,
    passed: bool,
}

pub fn gradcheck_cmd(s: &GradcheckSettings, out: Option<&Path>) -> Result<Outcome> {
    if s.instances == 0 {
        return Err(crate::config_error("--instances must be >= 1"));
    }
    let opts = if s.terms.is_empty() {
        GradCheckOptions {
            step: s.step,
            tolerance: s.tolerance,
            ..Default::default()
        }
    } else {
        let terms = s
            .terms
            .iter()
            .map(|t| t.parse::<Term>())
            .collect::<coastseg::Result<Vec<_>>>()?;
        GradCheckOptions {
            step: s.step,
            tolerance: s.tolerance,
            terms,
            composite: false,
        }
    };
    let cfg = instance_loss_config(LossWeights::default());
    let mut rows = Vec::new();
    let mut worst: Vec<(String, f64, f64)> = Vec::new();
    for i in 0..s.instances as u64 {
        let seed = s.seed + i;
        let (model, scene) = random_instance(seed, s.size)?;
        let report = gradcheck(&model, &scene, &cfg, &opts)?;
        if worst.is_empty() {
            worst = report
                .checks
                .iter()
                .map(|c| (c.name.clone(), 0.0, 0.0))
                .collect();
        }
        for (w, c) in worst.iter_mut().zip(&report.checks) {
            w.1 = w.1.max(c.mask_error);
            w.2 = w.2.max(c.param_error.unwrap_or(0.0));
            rows.push(GradcheckRow {
                instance: seed,
                term: c.name.clone(),
                mask_error: c.mask_error,
                param_error: c.param_error.unwrap_or(0.0),
                passed: c.passed,
            });
        }
    }
    let mut failed = Vec::new();
    println!(
        "{} instances of {}x{}, tolerance {:e}",
        s.instances, s.size, s.size, s.tolerance
    );
    for (name, me, pe) in &worst {
        let ok = *me < s.tolerance && *pe < s.tolerance;
        println!(
            "{:<10} max dL/dM err {:.3e}  max dL/dtheta err {:.3e}  {}",
            name,
            me,
            pe,
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed.push(name.clone());
        }
    }
    let mut m = Manifest::new("gradcheck", s.seed, s)?;
    if let Some(dir) = out {
        write_csv(&dir.join("gradcheck.csv"), &rows)?;
        m.outputs = vec!["gradcheck.csv".into()];
    }
    m.result("passed", failed.is_empty());
    let failure = (!failed.is_empty()).then(|| anyhow::Error::new(Error::GradCheck(failed)));
    Ok(Outcome {
        manifest: m,
        failure,
    })
}
