//! Deterministic synthetic coastline scenes.
//!
//! Water occupies the bottom of every image: a pixel is water when its row center lies at or
//! below a smooth coastline curve (a sum of at most three sinusoids plus optional per-column
//! raggedness). Each column therefore holds at most one contiguous water run.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::color::{hsv_to_rgb_pixel, rgb_to_hsv};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, HsvImage, LabelMask, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeFamily {
    Flat,
    Gentle,
    Wavy,
    Ragged,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 4] = [
        ShapeFamily::Flat,
        ShapeFamily::Gentle,
        ShapeFamily::Wavy,
        ShapeFamily::Ragged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Flat => "flat",
            ShapeFamily::Gentle => "gentle",
            ShapeFamily::Wavy => "wavy",
            ShapeFamily::Ragged => "ragged",
        }
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown shape family `{s}`")))
    }
}

/// One sinusoidal component of the coastline, amplitude in rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub amplitude: f64,
    /// Cycles across the image width.
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub family: ShapeFamily,
    /// Coastline mean position as a fraction of the height.
    pub base_level: f64,
    pub waves: Vec<Wave>,
    /// Uniform per-column jitter of the coastline, in rows.
    pub raggedness: f64,
    pub water_hsv: [f64; 3],
    pub land_hsv: [f64; 3],
    /// Half-width of the uniform per-pixel HSV jitter.
    pub jitter: f64,
    /// Standard deviation of additive Gaussian RGB noise.
    pub noise: f64,
    /// Small land-coloured blobs painted inside the water (labels unchanged).
    pub speckle_blobs: usize,
    /// Water-coloured patches painted on land (labels unchanged).
    pub false_water_patches: usize,
    /// Minimum Euclidean distance between the water and land HSV means.
    pub min_margin: f64,
    /// Reject scenes whose labels hold a single class.
    pub require_both_classes: bool,
    pub seed: u64,
}

impl SceneSpec {
    /// Flat coastline at mid-height with no noise or artifacts.
    pub fn flat(height: usize, width: usize, seed: u64) -> Self {
        Self {
            height,
            width,
            family: ShapeFamily::Flat,
            base_level: 0.5,
            waves: Vec::new(),
            raggedness: 0.0,
            water_hsv: [0.58, 0.35, 0.45],
            land_hsv: [0.22, 0.45, 0.5],
            jitter: 0.04,
            noise: 0.0,
            speckle_blobs: 0,
            false_water_patches: 0,
            min_margin: 0.1,
            require_both_classes: true,
            seed,
        }
    }

    /// Draws a randomized spec from `family` using `seed`.
    pub fn sample(family: ShapeFamily, height: usize, width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = height as f64;
        let wave = |rng: &mut ChaCha8Rng, amp: (f64, f64), freq: (f64, f64)| Wave {
            amplitude: rng.random_range(amp.0..amp.1) * h,
            frequency: rng.random_range(freq.0..freq.1),
            phase: rng.random_range(0.0..TAU),
        };
        let (waves, raggedness) = match family {
            ShapeFamily::Flat => (Vec::new(), 0.0),
            ShapeFamily::Gentle => (vec![wave(&mut rng, (0.05, 0.12), (0.3, 1.0))], 0.0),
            ShapeFamily::Wavy => {
                let n = rng.random_range(2..=3);
                let waves = (0..n)
                    .map(|_| wave(&mut rng, (0.03, 0.08), (0.8, 2.5)))
                    .collect();
                (waves, 0.0)
            }
            ShapeFamily::Ragged => {
                let waves = vec![wave(&mut rng, (0.04, 0.1), (0.5, 1.5))];
                (waves, rng.random_range(0.8..1.8))
            }
        };
        let mut perturb = |base: [f64; 3]| {
            [
                (base[0] + rng.random_range(-0.03..0.03)).rem_euclid(1.0),
                (base[1] + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0),
                (base[2] + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0),
            ]
        };
        let water_hsv = perturb([0.58, 0.35, 0.45]);
        let land_hsv = perturb([0.22, 0.45, 0.5]);
        let base_level = rng.random_range(0.35..0.65);
        let speckle_blobs = rng.random_range(1..=3);
        let false_water_patches = rng.random_range(0..=2);
        Self {
            height,
            width,
            family,
            base_level,
            waves,
            raggedness,
            water_hsv,
            land_hsv,
            jitter: 0.04,
            noise: 0.03,
            speckle_blobs,
            false_water_patches,
            min_margin: 0.1,
            require_both_classes: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("scene dimensions must be positive".into()));
        }
        if self.waves.len() > 3 {
            return Err(Error::Config("at most three coastline waves".into()));
        }
        let d: f64 = self
            .water_hsv
            .iter()
            .zip(&self.land_hsv)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if d < self.min_margin {
            return Err(Error::Config(format!(
                "water/land HSV means only {d:.4} apart (margin {})",
                self.min_margin
            )));
        }
        if !(self.jitter >= 0.0 && self.noise >= 0.0 && self.raggedness >= 0.0) {
            return Err(Error::Config(
                "jitter, noise and raggedness must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Coastline row position for each column.
    fn coastline(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let h = self.height as f64;
        let w = self.width as f64;
        (0..self.width)
            .map(|x| {
                let t = x as f64 / w;
                let mut c = self.base_level * h;
                for wave in &self.waves {
                    c += wave.amplitude * (TAU * wave.frequency * t + wave.phase).sin();
                }
                if self.raggedness > 0.0 {
                    c += rng.random_range(-self.raggedness..=self.raggedness);
                }
                c
            })
            .collect()
    }
}

/// Paints a filled disc through `f`.
fn disc(
    height: usize,
    width: usize,
    ci: usize,
    cj: usize,
    radius: f64,
    mut f: impl FnMut(usize, usize),
) {
    let r = radius.ceil() as isize;
    for di in -r..=r {
        for dj in -r..=r {
            if ((di * di + dj * dj) as f64) > radius * radius {
                continue;
            }
            let (Some(i), Some(j)) = (ci.checked_add_signed(di), cj.checked_add_signed(dj)) else {
                continue;
            };
            if i < height && j < width {
                f(i, j);
            }
        }
    }
}

/// Renders the scene. RGB values are quantized to multiples of 1/255 so that an 8-bit PPM
/// round trip reproduces the image exactly.
pub fn generate(spec: &SceneSpec) -> Result<(RgbImage, LabelMask)> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let coast = spec.coastline(&mut rng);
    let labels = Grid2D::from_fn(
        h,
        w,
        |i, j| {
            if i as f64 + 0.5 >= coast[j] {
                1.0
            } else {
                0.0
            }
        },
    );
    let water_px = labels.values().iter().filter(|&&v| v == 1.0).count();
    if spec.require_both_classes && (water_px == 0 || water_px == h * w) {
        return Err(Error::DegenerateScene(format!(
            "seed {} yields a single-class label mask",
            spec.seed
        )));
    }

    // Per-pixel region colour; artifacts override the colour source but not the label.
    let mut water_colored: Vec<bool> = labels.values().iter().map(|&v| v == 1.0).collect();
    for _ in 0..spec.speckle_blobs {
        let (i, j) = (rng.random_range(0..h), rng.random_range(0..w));
        let radius = rng.random_range(0.5..1.6);
        disc(h, w, i, j, radius, |a, b| {
            if labels.get(a, b) == 1.0 {
                water_colored[a * w + b] = false;
            }
        });
    }
    for _ in 0..spec.false_water_patches {
        let (i, j) = (rng.random_range(0..h), rng.random_range(0..w));
        let radius = rng.random_range(1.0..2.6);
        disc(h, w, i, j, radius, |a, b| {
            if labels.get(a, b) == 0.0 {
                water_colored[a * w + b] = true;
            }
        });
    }

    let noise = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;
    let jitter = spec.jitter;
    let img = RgbImage::from_fn(h, w, |i, j| {
        let base = if water_colored[i * w + j] {
            spec.water_hsv
        } else {
            spec.land_hsv
        };
        let mut sample = |x: f64| {
            if jitter > 0.0 {
                x + rng.random_range(-jitter..=jitter)
            } else {
                x
            }
        };
        let hsv = [
            sample(base[0]).rem_euclid(1.0),
            sample(base[1]).clamp(0.0, 1.0),
            sample(base[2]).clamp(0.0, 1.0),
        ];
        let rgb = hsv_to_rgb_pixel(hsv);
        rgb.map(|c| {
            let c = if spec.noise > 0.0 {
                c + noise.sample(&mut rng)
            } else {
                c
            };
            (c.clamp(0.0, 1.0) * 255.0).round() / 255.0
        })
    })?;
    Ok((img, LabelMask::new(labels)?))
}

/// A generated scene with its cached HSV conversion.
#[derive(Debug, Clone)]
pub struct Scene {
    pub id: usize,
    pub seed: u64,
    pub family: ShapeFamily,
    pub image: RgbImage,
    pub hsv: HsvImage,
    pub labels: LabelMask,
}

impl Scene {
    pub fn new(
        id: usize,
        seed: u64,
        family: ShapeFamily,
        image: RgbImage,
        labels: LabelMask,
    ) -> Result<Self> {
        image.r().check_same_dims(labels.grid())?;
        let hsv = rgb_to_hsv(&image);
        Ok(Self {
            id,
            seed,
            family,
            image,
            hsv,
            labels,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

/// Scenes plus a disjoint train/validation partition (indices into `scenes`, ascending).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub scenes: Vec<Scene>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Dataset {
    pub fn new(scenes: Vec<Scene>, train: Vec<usize>, validation: Vec<usize>) -> Result<Self> {
        let n = scenes.len();
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&validation) {
            if i >= n || seen[i] {
                return Err(Error::Config(format!(
                    "scene index {i} out of range or listed twice in the partition"
                )));
            }
            seen[i] = true;
        }
        if train.is_empty() {
            return Err(Error::Config("training split is empty".into()));
        }
        Ok(Self {
            scenes,
            train,
            validation,
        })
    }

    pub fn split_of(&self, index: usize) -> Option<Split> {
        if self.train.contains(&index) {
            Some(Split::Train)
        } else if self.validation.contains(&index) {
            Some(Split::Validation)
        } else {
            None
        }
    }

    pub fn train_scenes(&self) -> impl Iterator<Item = &Scene> {
        self.train.iter().map(|&i| &self.scenes[i])
    }

    pub fn validation_scenes(&self) -> impl Iterator<Item = &Scene> {
        self.validation.iter().map(|&i| &self.scenes[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    pub count: usize,
    pub split: f64,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            count: 40,
            split: 0.8,
            seed: 7,
            height: 32,
            width: 32,
        }
    }
}

/// Number of training scenes for `count` scenes at `split`; both splits stay non-empty.
pub fn train_count(count: usize, split: f64) -> usize {
    ((count as f64 * split).round() as usize).clamp(1, count - 1)
}

/// Stratified partition: each family contributes to the training split in proportion to its
/// size (largest-remainder rounding), members chosen by a seeded shuffle.
pub fn stratified_split(
    families: &[ShapeFamily],
    split: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let total_train = train_count(families.len(), split);
    let mut groups: Vec<(ShapeFamily, Vec<usize>)> = Vec::new();
    for fam in ShapeFamily::ALL {
        let members: Vec<usize> = (0..families.len())
            .filter(|&i| families[i] == fam)
            .collect();
        if !members.is_empty() {
            groups.push((fam, members));
        }
    }
    let quotas: Vec<f64> = groups
        .iter()
        .map(|(_, m)| m.len() as f64 * total_train as f64 / families.len() as f64)
        .collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = total_train - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    // Largest fractional part first; ties by family order.
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &g in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if alloc[g] < groups[g].1.len() {
            alloc[g] += 1;
            remaining -= 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for ((_, members), n) in groups.iter().zip(alloc) {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        train.extend_from_slice(&shuffled[..n]);
        validation.extend_from_slice(&shuffled[n..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    (train, validation)
}

/// Scene specs of a benchmark in index order; families cycle through [`ShapeFamily::ALL`].
pub fn benchmark_specs(spec: &BenchmarkSpec) -> Vec<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count)
        .map(|i| {
            let family = ShapeFamily::ALL[i % ShapeFamily::ALL.len()];
            SceneSpec::sample(family, spec.height, spec.width, rng.random())
        })
        .collect()
}

pub fn make_benchmark_with(spec: &BenchmarkSpec) -> Result<Dataset> {
    if spec.count < 5 {
        return Err(Error::Config(format!(
            "count must be >= 5, got {}",
            spec.count
        )));
    }
    if !(spec.split > 0.0 && spec.split < 1.0) {
        return Err(Error::Config(format!(
            "split must lie in (0, 1), got {}",
            spec.split
        )));
    }
    let mut scenes = Vec::with_capacity(spec.count);
    for (id, mut scene_spec) in benchmark_specs(spec).into_iter().enumerate() {
        // A sampled curve can leave one class empty on tiny images; fall back to mid-height.
        let (image, labels) = match generate(&scene_spec) {
            Err(Error::DegenerateScene(_)) => {
                scene_spec.base_level = 0.5;
                scene_spec.raggedness = 0.0;
                scene_spec.waves.clear();
                generate(&scene_spec)?
            }
            other => other?,
        };
        scenes.push(Scene::new(
            id,
            scene_spec.seed,
            scene_spec.family,
            image,
            labels,
        )?);
    }
    let families: Vec<ShapeFamily> = scenes.iter().map(|s| s.family).collect();
    let (train, validation) = stratified_split(&families, spec.split, spec.seed);
    Dataset::new(scenes, train, validation)
}

/// Benchmark of `count` 32x32 scenes.
pub fn make_benchmark(count: usize, split_fraction: f64, seed: u64) -> Result<Dataset> {
    make_benchmark_with(&BenchmarkSpec {
        count,
        split: split_fraction,
        seed,
        ..Default::default()
    })
}
