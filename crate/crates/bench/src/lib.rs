//! Shared inputs for the criterion benchmarks.

use coastseg::losses::{HsvPriorParams, LossConfig};
use coastseg::model::{predict, ToySegmenter};
use coastseg::synth::{generate, Scene, SceneSpec, ShapeFamily};
use coastseg::ProbMask;

/// A sampled scene plus the prediction of an untrained model on it.
pub struct Fixture {
    pub scene: Scene,
    pub prediction: ProbMask,
    pub params: HsvPriorParams,
    pub loss: LossConfig,
}

pub fn fixture(side: usize, seed: u64) -> Fixture {
    let spec = SceneSpec::sample(ShapeFamily::Ragged, side, side, seed);
    let (image, labels) = generate(&spec).expect("valid scene spec");
    let scene = Scene::new(0, seed, ShapeFamily::Ragged, image, labels).expect("matching dims");
    let params = HsvPriorParams::default();
    let model = ToySegmenter::random(seed, 0.5, params);
    let prediction = predict(&model, &scene.image);
    Fixture {
        scene,
        prediction,
        params,
        loss: LossConfig::default(),
    }
}

pub const SIDES: [usize; 3] = [32, 64, 128];
