//! Robust coastal-water segmentation toolkit.
//!
//! A five-term composite loss (cross-entropy, HSV colour prior, coastline smoothness,
//! column connectivity, sea-variance cleanup) with analytic mask gradients, the morphology
//! and connected-component machinery it relies on, a per-pixel logistic segmenter trained by
//! gradient descent on synthetic coastline scenes, and diagnostics for gradient fidelity,
//! Lipschitz behaviour, and training stability.

pub mod ablation;
pub mod color;
pub mod components;
pub mod error;
pub mod filters;
pub mod gradcheck;
pub mod grid;
pub mod lipschitz;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod morphology;
pub mod netpbm;
pub mod postprocess;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use grid::{Grid2D, HsvImage, LabelMask, ProbMask, RgbImage};
