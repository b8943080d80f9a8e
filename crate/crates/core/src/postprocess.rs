//! Inference-time mask refinement: binarize, open/close, area cleanup, column connectivity.

use crate::components::{connected_components_2d, ComponentLabeling, Connectivity};
use crate::error::{Error, Result};
use crate::filters::check_window;
use crate::grid::{LabelMask, ProbMask};
use crate::losses::check_unit_open;
use crate::morphology::{close, open, BinaryMask};

/// Upper bound on refinement passes; every test mask settles in a handful.
pub const MAX_PASSES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocConfig {
    pub threshold: f64,
    pub open_close_k: usize,
    /// Water components smaller than this are turned into land.
    pub min_sea_area: usize,
    /// Land components smaller than this are filled with water.
    pub min_land_area: usize,
    pub enforce_column_connectivity: bool,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            open_close_k: 3,
            min_sea_area: 8,
            min_land_area: 8,
            enforce_column_connectivity: true,
        }
    }
}

impl PostprocConfig {
    /// Configuration under which `refine` is plain thresholding.
    pub fn disabled(threshold: f64) -> Self {
        Self {
            threshold,
            open_close_k: 1,
            min_sea_area: 1,
            min_land_area: 1,
            enforce_column_connectivity: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_open("threshold", self.threshold)?;
        check_window(self.open_close_k)?;
        if self.min_sea_area == 0 || self.min_land_area == 0 {
            return Err(Error::Config("minimum areas must be positive".into()));
        }
        Ok(())
    }
}

fn drop_small(mask: &mut BinaryMask, labeling: &ComponentLabeling, min_area: usize, value: bool) {
    if min_area <= 1 {
        return;
    }
    let (h, w) = mask.dims();
    for i in 0..h {
        for j in 0..w {
            let id = labeling.label(i, j);
            if id != 0 && labeling.areas()[id as usize - 1] < min_area {
                mask.set(i, j, value);
            }
        }
    }
}

/// Keeps the longest water run in every column; the earliest wins ties.
pub fn keep_largest_column_runs(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = mask.dims();
    let mut out = BinaryMask::empty(h, w);
    for j in 0..w {
        let mut best: Option<(usize, usize)> = None;
        let mut i = 0;
        while i < h {
            if !mask.is_set(i, j) {
                i += 1;
                continue;
            }
            let start = i;
            while i < h && mask.is_set(i, j) {
                i += 1;
            }
            if best.is_none_or(|(s, e)| i - start > e - s) {
                best = Some((start, i));
            }
        }
        if let Some((s, e)) = best {
            for r in s..e {
                out.set(r, j, true);
            }
        }
    }
    out
}

fn refine_pass(mask: &BinaryMask, cfg: &PostprocConfig) -> Result<BinaryMask> {
    let mut m = if cfg.open_close_k > 1 {
        close(&open(mask, cfg.open_close_k)?, cfg.open_close_k)?
    } else {
        mask.clone()
    };
    let water = connected_components_2d(&m, Connectivity::Four);
    drop_small(&mut m, &water, cfg.min_sea_area, false);
    let land = connected_components_2d(&m.complement(), Connectivity::Four);
    drop_small(&mut m, &land, cfg.min_land_area, true);
    if cfg.enforce_column_connectivity {
        m = keep_largest_column_runs(&m);
    }
    Ok(m)
}

/// Binarizes at `cfg.threshold`, then repeats open/close, area cleanup and column pruning
/// until the mask stops changing, so that `refine` is idempotent.
pub fn refine(mask: &ProbMask, cfg: &PostprocConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    refine_binary(&BinaryMask::threshold(mask, cfg.threshold), cfg)
}

pub fn refine_binary(mask: &BinaryMask, cfg: &PostprocConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    let mut current = mask.clone();
    for _ in 0..MAX_PASSES {
        let next = refine_pass(&current, cfg)?;
        if next == current {
            return Ok(next);
        }
        current = next;
    }
    Err(Error::Config(format!(
        "refinement did not settle within {MAX_PASSES} passes"
    )))
}

/// Predicted water components (4-connected) that touch no true water pixel.
pub fn count_false_components(mask: &BinaryMask, labels: &LabelMask) -> Result<usize> {
    mask.grid().check_same_dims(labels.grid())?;
    let cc = connected_components_2d(mask, Connectivity::Four);
    let mut hits = vec![false; cc.component_count()];
    let (h, w) = mask.dims();
    for i in 0..h {
        for j in 0..w {
            let id = cc.label(i, j);
            if id != 0 && labels.get(i, j) > 0.5 {
                hits[id as usize - 1] = true;
            }
        }
    }
    Ok(hits.iter().filter(|&&h| !h).count())
}
