//! Leave-one-term-out ablation over the composite loss.

use crate::error::Result;
use crate::losses::{LossWeights, Term};
use crate::synth::Dataset;
use crate::train::{train, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    /// `full`, `-hsv`, `-coast`, `-conn`, `-sea` or `ce-only`.
    pub name: String,
    pub weights: LossWeights,
    pub seed: u64,
    pub final_iou: f64,
    pub iou_variance: f64,
    /// Full-configuration IoU minus this row's IoU.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// The six weight settings, in table order.
pub fn ablation_configs(full: LossWeights) -> Vec<(String, LossWeights)> {
    let mut out = vec![("full".to_string(), full)];
    for t in Term::AUXILIARY {
        out.push((format!("-{}", t.name()), full.without(t)));
    }
    out.push(("ce-only".into(), LossWeights::only(Term::Ce, full.ce)));
    out
}

/// Trains once per configuration with the same seed and data. Reports are returned
/// alongside the table in row order.
pub fn ablate(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(AblationTable, Vec<TrainReport>)> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (name, weights) in ablation_configs(config.loss.weights) {
        let mut cfg = *config;
        cfg.loss.weights = weights;
        let (_, report) = train(dataset, &cfg)?;
        rows.push(AblationRow {
            name,
            weights,
            seed: cfg.seed,
            final_iou: report.summary.final_metrics.iou,
            iou_variance: report.summary.late_iou_variance,
            delta: 0.0,
        });
        reports.push(report);
    }
    let full = rows[0].final_iou;
    for r in &mut rows {
        r.delta = full - r.final_iou;
    }
    Ok((AblationTable { rows }, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_benchmark_with, BenchmarkSpec};

    #[test]
    fn six_rows_in_order() {
        let names: Vec<String> = ablation_configs(LossWeights::default())
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        assert_eq!(
            names,
            ["full", "-hsv", "-coast", "-conn", "-sea", "ce-only"]
        );
    }

    #[test]
    fn zero_weight_term_has_zero_delta() {
        let ds = make_benchmark_with(&BenchmarkSpec {
            count: 5,
            split: 0.6,
            seed: 2,
            height: 12,
            width: 12,
        })
        .unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            lipschitz_trials: 0,
            loss: crate::losses::LossConfig::default().with_weights(LossWeights {
                conn: 0.0,
                ..LossWeights::default()
            }),
            ..Default::default()
        };
        let (table, _) = ablate(&ds, &cfg).unwrap();
        assert_eq!(table.rows.len(), 6);
        assert_eq!(table.row("-conn").unwrap().delta, 0.0);
        assert!(table.rows.iter().all(|r| r.seed == cfg.seed));
    }
}
