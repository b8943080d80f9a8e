//! Connected-component labeling in 2-D and run counting in 1-D.

use crate::error::{Error, Result};
use crate::morphology::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl TryFrom<u32> for Connectivity {
    type Error = Error;

    fn try_from(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::Config(format!(
                "connectivity must be 4 or 8, got {n}"
            ))),
        }
    }
}

impl Connectivity {
    pub fn as_u32(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Component ids per pixel (0 = background, components numbered `1..=count` in row-major
/// order of first encounter) and each component's area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    areas: Vec<usize>,
}

impl ComponentLabeling {
    pub fn component_count(&self) -> usize {
        self.areas.len()
    }

    /// `areas()[id - 1]` is the pixel count of component `id`.
    pub fn areas(&self) -> &[usize] {
        &self.areas
    }

    #[inline]
    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Iterative flood fill.
pub fn connected_components_2d(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let (height, width) = mask.dims();
    let mut labels = vec![0u32; height * width];
    let mut areas = Vec::new();
    let mut stack = Vec::new();
    for i in 0..height {
        for j in 0..width {
            if !mask.is_set(i, j) || labels[i * width + j] != 0 {
                continue;
            }
            let id = areas.len() as u32 + 1;
            let mut area = 0;
            labels[i * width + j] = id;
            stack.push((i, j));
            while let Some((r, c)) = stack.pop() {
                area += 1;
                for &(dr, dc) in connectivity.offsets() {
                    let (Some(nr), Some(nc)) = (r.checked_add_signed(dr), c.checked_add_signed(dc))
                    else {
                        continue;
                    };
                    if nr >= height || nc >= width {
                        continue;
                    }
                    let idx = nr * width + nc;
                    if labels[idx] == 0 && mask.is_set(nr, nc) {
                        labels[idx] = id;
                        stack.push((nr, nc));
                    }
                }
            }
            areas.push(area);
        }
    }
    ComponentLabeling {
        height,
        width,
        labels,
        areas,
    }
}

/// Number of maximal runs of values `>= threshold`.
pub fn count_column_regions(column: &[f64], threshold: f64) -> usize {
    let mut count = 0;
    let mut inside = false;
    for &v in column {
        let water = v >= threshold;
        if water && !inside {
            count += 1;
        }
        inside = water;
    }
    count
}

/// Half-open `[start, end)` runs of values `>= threshold`.
pub fn column_runs(column: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in column.iter().enumerate() {
        match (v >= threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, column.len()));
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_foreground() {
        let l = connected_components_2d(&BinaryMask::empty(4, 4), Connectivity::Four);
        assert_eq!(l.component_count(), 0);
        assert!(l.labels().iter().all(|&x| x == 0));
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let m = BinaryMask::from_fn(2, 2, |i, j| i == j);
        assert_eq!(
            connected_components_2d(&m, Connectivity::Four).component_count(),
            2
        );
        assert_eq!(
            connected_components_2d(&m, Connectivity::Eight).component_count(),
            1
        );
    }

    #[test]
    fn labels_follow_first_encounter() {
        // Component touching (0, 2) is encountered before the one starting at (1, 0).
        let m = BinaryMask::from_fn(3, 3, |i, j| (i == 0 && j == 2) || (i >= 1 && j == 0));
        let l = connected_components_2d(&m, Connectivity::Four);
        assert_eq!(l.label(0, 2), 1);
        assert_eq!(l.label(1, 0), 2);
        assert_eq!(l.areas(), &[1, 2]);
    }

    #[test]
    fn connectivity_parse() {
        assert_eq!(Connectivity::try_from(8).unwrap(), Connectivity::Eight);
        assert!(Connectivity::try_from(6).is_err());
    }

    #[test]
    fn column_regions() {
        assert_eq!(count_column_regions(&[0.0, 0.0, 0.0], 0.5), 0);
        assert_eq!(count_column_regions(&[1.0, 1.0, 0.0, 1.0], 0.5), 2);
        assert_eq!(count_column_regions(&[], 0.5), 0);
        assert_eq!(
            column_runs(&[1.0, 1.0, 0.0, 1.0], 0.5),
            vec![(0, 2), (3, 4)]
        );
    }
}
