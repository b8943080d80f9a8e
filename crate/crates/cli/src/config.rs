//! Flat key = value training configuration (a TOML subset) and its overrides.

use std::path::Path;

use anyhow::{Context, Result};
use coastseg::components::Connectivity;
use coastseg::losses::{ConnConfig, LossConfig, LossWeights};
use coastseg::postprocess::PostprocConfig;
use coastseg::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::config_error;

/// Every tunable of a training run. Missing keys take the built-in defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatConfig {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub init_scale: f64,
    pub variance_window: usize,
    pub eval_threshold: f64,
    pub lipschitz_trials: usize,
    pub lambda_ce: f64,
    pub lambda_hsv: f64,
    pub lambda_coast: f64,
    pub lambda_conn: f64,
    pub lambda_sea: f64,
    pub sigma_bw: f64,
    /// Absent means "mean HSV of training water pixels".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_hsv: Option<[f64; 3]>,
    pub threshold: f64,
    pub coast_k: usize,
    pub sea_window: usize,
    pub sea_min_area: usize,
    pub sea_connectivity: u32,
    pub max_regions: usize,
    pub tau_soft: f64,
    pub conn_threshold: f64,
    pub ce_eps: f64,
}

impl Default for FlatConfig {
    fn default() -> Self {
        Self::from(&TrainConfig::default())
    }
}

impl From<&TrainConfig> for FlatConfig {
    fn from(c: &TrainConfig) -> Self {
        let l = &c.loss;
        Self {
            seed: c.seed,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            init_scale: c.init_scale,
            variance_window: c.variance_window,
            eval_threshold: c.eval_threshold,
            lipschitz_trials: c.lipschitz_trials,
            lambda_ce: l.weights.ce,
            lambda_hsv: l.weights.hsv,
            lambda_coast: l.weights.coast,
            lambda_conn: l.weights.conn,
            lambda_sea: l.weights.sea,
            sigma_bw: c.sigma_bw,
            ref_hsv: c.ref_hsv,
            threshold: l.threshold,
            coast_k: l.coast_k,
            sea_window: l.sea_window,
            sea_min_area: l.sea_min_area,
            sea_connectivity: l.sea_connectivity.as_u32(),
            max_regions: l.conn.max_regions,
            tau_soft: l.conn.tau_soft,
            conn_threshold: l.conn.threshold,
            ce_eps: l.ce_eps,
        }
    }
}

impl FlatConfig {
    pub fn to_train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            loss: LossConfig {
                weights: LossWeights {
                    ce: self.lambda_ce,
                    hsv: self.lambda_hsv,
                    coast: self.lambda_coast,
                    conn: self.lambda_conn,
                    sea: self.lambda_sea,
                },
                threshold: self.threshold,
                coast_k: self.coast_k,
                conn: ConnConfig {
                    max_regions: self.max_regions,
                    tau_soft: self.tau_soft,
                    threshold: self.conn_threshold,
                },
                sea_window: self.sea_window,
                sea_min_area: self.sea_min_area,
                sea_connectivity: Connectivity::try_from(self.sea_connectivity)?,
                ce_eps: self.ce_eps,
            },
            sigma_bw: self.sigma_bw,
            ref_hsv: self.ref_hsv,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            init_scale: self.init_scale,
            variance_window: self.variance_window,
            eval_threshold: self.eval_threshold,
            lipschitz_trials: self.lipschitz_trials,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

/// Parses `key=value` with the value in TOML syntax (`0.5`, `[0.5, 0.3, 0.4]`).
fn parse_assignment(assignment: &str) -> Result<toml::Table> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("expected KEY=VALUE, got `{assignment}`")))?;
    toml::from_str(&format!("{} = {}", key.trim(), value.trim()))
        .map_err(|e| config_error(format!("bad override `{assignment}`: {e}")))
}

/// Defaults, then the config file, then `--set` overrides in order.
pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<FlatConfig> {
    let mut table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            text.parse::<toml::Table>()
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        table.extend(parse_assignment(o)?);
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| config_error(format!("config: {e}")))
}

/// Post-processing settings for `eval --postprocess`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocFlat {
    pub threshold: f64,
    pub open_close_k: usize,
    pub min_sea_area: usize,
    pub min_land_area: usize,
    pub enforce_column_connectivity: bool,
}

impl From<PostprocFlat> for PostprocConfig {
    fn from(p: PostprocFlat) -> Self {
        PostprocConfig {
            threshold: p.threshold,
            open_close_k: p.open_close_k,
            min_sea_area: p.min_sea_area,
            min_land_area: p.min_land_area,
            enforce_column_connectivity: p.enforce_column_connectivity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let flat = FlatConfig::default();
        let text = flat.to_toml();
        let back: FlatConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, flat);
        assert_eq!(back.to_train_config().unwrap(), TrainConfig::default());
    }

    #[test]
    fn awkward_floats_survive() {
        let flat = FlatConfig {
            learning_rate: 0.1 + 0.2,
            ref_hsv: Some([1.0 / 3.0, 2e-17, 0.999_999_999_999_9]),
            ..Default::default()
        };
        let back: FlatConfig = toml::from_str(&flat.to_toml()).unwrap();
        assert_eq!(back, flat);
    }

    #[test]
    fn overrides_win_in_order() {
        let cfg = load(
            None,
            &[
                "epochs=3".into(),
                "lambda_conn = 0".into(),
                "epochs=5".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.lambda_conn, 0.0);
        assert!(load(None, &["nonsense=1".into()]).is_err());
        assert!(load(None, &["epochs".into()]).is_err());
    }
}
