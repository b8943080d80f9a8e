//! On-disk layout: scene directories, model files and CSV reports.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use coastseg::losses::HsvPriorParams;
use coastseg::model::{ToySegmenter, FEATURE_COUNT};
use coastseg::netpbm::{self, Encoding};
use coastseg::synth::{Dataset, Scene, ShapeFamily, Split};
use coastseg::ProbMask;
use serde::{Deserialize, Serialize};

use crate::config_error;

pub const SCENE_LIST: &str = "scenes.txt";
pub const SCENE_DIR: &str = "scenes";

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    netpbm::write_file_atomic(path, bytes)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

/// Serializes rows with a header into CSV and writes them atomically.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
    write_bytes(path, &bytes)
}

/// `scenes/scene_007.ppm` and its labels `scenes/scene_007.pgm`.
pub fn scene_stem(id: usize) -> String {
    format!("scene_{id:03}")
}

pub fn labels_path(image: &Path) -> PathBuf {
    image.with_extension("pgm")
}

/// Writes images, labels and the scene list; returns the written paths relative to `dir`.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<Vec<String>> {
    let mut list = String::from("# path seed split family\n");
    let mut written = Vec::new();
    for (idx, scene) in dataset.scenes.iter().enumerate() {
        let rel = format!("{SCENE_DIR}/{}.ppm", scene_stem(scene.id));
        let image = dir.join(&rel);
        write_bytes(&image, &netpbm::encode_ppm(&scene.image, Encoding::Binary))?;
        write_bytes(&labels_path(&image), &netpbm::encode_labels(&scene.labels))?;
        let split = dataset.split_of(idx).expect("every scene is in a split");
        list.push_str(&format!(
            "{rel} {} {} {}\n",
            scene.seed,
            split.name(),
            scene.family
        ));
        written.push(rel.clone());
        written.push(format!("{SCENE_DIR}/{}.pgm", scene_stem(scene.id)));
    }
    write_text(&dir.join(SCENE_LIST), &list)?;
    written.push(SCENE_LIST.into());
    Ok(written)
}

/// A dataset read back from disk, with the stems used to name per-scene outputs.
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub stems: Vec<String>,
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let list_path = dir.join(SCENE_LIST);
    let text = std::fs::read_to_string(&list_path)
        .with_context(|| format!("reading {}", list_path.display()))?;
    let mut scenes = Vec::new();
    let mut stems = Vec::new();
    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [rel, seed, split, family] = fields[..] else {
            return Err(config_error(format!(
                "{}:{}: expected `path seed split family`",
                list_path.display(),
                lineno + 1
            )));
        };
        let seed: u64 = seed.parse().map_err(|_| {
            config_error(format!(
                "{}:{}: bad seed `{seed}`",
                list_path.display(),
                lineno + 1
            ))
        })?;
        let split: Split = split.parse()?;
        let family: ShapeFamily = family.parse()?;
        let image_path = dir.join(rel);
        let image = netpbm::decode_ppm(&netpbm::read_file(&image_path)?)
            .with_context(|| format!("decoding {}", image_path.display()))?;
        let lpath = labels_path(&image_path);
        let labels = netpbm::decode_labels(&netpbm::read_file(&lpath)?)
            .with_context(|| format!("decoding {}", lpath.display()))?;
        let idx = scenes.len();
        scenes.push(Scene::new(idx, seed, family, image, labels)?);
        stems.push(
            Path::new(rel)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| scene_stem(idx)),
        );
        match split {
            Split::Train => train.push(idx),
            Split::Validation => validation.push(idx),
        }
    }
    Ok(LoadedDataset {
        dataset: Dataset::new(scenes, train, validation)?,
        stems,
    })
}

/// Reads any PGM as a probability mask (samples divided by maxval).
pub fn load_mask(path: &Path) -> Result<ProbMask> {
    netpbm::decode_prob_mask(&netpbm::read_file(path)?)
        .with_context(|| format!("decoding {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub theta: Vec<f64>,
    pub alpha_h: f64,
    pub alpha_s: f64,
    pub alpha_v: f64,
    pub beta: f64,
    pub sigma_bw: f64,
    pub ref_hsv: [f64; 3],
}

impl From<&ToySegmenter> for ModelFile {
    fn from(m: &ToySegmenter) -> Self {
        let p = &m.hsv_params;
        Self {
            theta: m.theta.to_vec(),
            alpha_h: p.alpha_h,
            alpha_s: p.alpha_s,
            alpha_v: p.alpha_v,
            beta: p.beta,
            sigma_bw: p.sigma_bw,
            ref_hsv: p.ref_hsv,
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<ToySegmenter> {
        let theta: [f64; FEATURE_COUNT] = self.theta.as_slice().try_into().map_err(|_| {
            config_error(format!(
                "model needs {FEATURE_COUNT} theta values, got {}",
                self.theta.len()
            ))
        })?;
        let params = HsvPriorParams {
            alpha_h: self.alpha_h,
            alpha_s: self.alpha_s,
            alpha_v: self.alpha_v,
            beta: self.beta,
            sigma_bw: self.sigma_bw,
            ref_hsv: self.ref_hsv,
        };
        params.validate()?;
        Ok(ToySegmenter::new(theta, params))
    }
}

pub fn save_model(path: &Path, model: &ToySegmenter) -> Result<()> {
    let text = toml::to_string(&ModelFile::from(model))?;
    write_text(path, &format!("# coastseg logistic segmenter\n{text}"))
}

pub fn load_model(path: &Path) -> Result<ToySegmenter> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model {}", path.display()))?;
    let file: ModelFile =
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    file.into_model()
}
