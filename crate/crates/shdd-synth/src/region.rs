//! Recursive region splitting for the divide-and-distort procedure.

use serde::{Deserialize, Serialize};
use tensor_core::Rng;

use crate::error::SynthError;
use crate::Result;

/// Axis-aligned pixel rectangle. Regions produced by [`split_regions`] tile
/// their image: pairwise disjoint, union covering every pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Region {
    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

/// Cut positions along an extent that leave both children at least 25% of
/// it: `c` in `[ceil(E/4), floor(3E/4)]` intersected with `[1, E-1]`.
fn cut_range(extent: usize) -> Option<(usize, usize)> {
    let lo = extent.div_ceil(4).max(1);
    let hi = (extent * 3 / 4).min(extent - 1);
    (lo <= hi).then_some((lo, hi))
}

/// Performs `chops` sequential splits. Each split takes the current
/// largest-area region (first wins on ties), draws an orientation uniformly
/// (0 = horizontal line, cutting the height), then draws a cut position
/// uniformly from the 25%-margin range. Falls back to the other orientation
/// if the drawn one has no admissible cut.
pub fn split_regions(width: usize, height: usize, chops: usize, rng: &mut Rng) -> Result<Vec<Region>> {
    if !(2..=4).contains(&chops) {
        return Err(SynthError::invalid(
            "split_regions",
            format!("chops must be 2, 3, or 4, got {chops}"),
        ));
    }
    if width < 64 || height < 64 {
        return Err(SynthError::invalid(
            "split_regions",
            format!("image must be at least 64x64, got {width}x{height}"),
        ));
    }

    let mut regions = vec![Region {
        x: 0,
        y: 0,
        w: width,
        h: height,
    }];
    for _ in 0..chops {
        let mut idx = 0;
        for (i, r) in regions.iter().enumerate() {
            if r.area() > regions[idx].area() {
                idx = i;
            }
        }
        let parent = regions[idx];

        let horizontal = rng.next_below(2) == 0;
        let pick = |extent: usize, rng: &mut Rng| -> Option<usize> {
            cut_range(extent).map(|(lo, hi)| lo + rng.next_below((hi - lo + 1) as u64) as usize)
        };
        let (first, second) = if horizontal {
            match pick(parent.h, rng) {
                Some(c) => split_h(parent, c),
                None => match pick(parent.w, rng) {
                    Some(c) => split_v(parent, c),
                    None => return Err(too_small(parent)),
                },
            }
        } else {
            match pick(parent.w, rng) {
                Some(c) => split_v(parent, c),
                None => match pick(parent.h, rng) {
                    Some(c) => split_h(parent, c),
                    None => return Err(too_small(parent)),
                },
            }
        };
        regions[idx] = first;
        regions.insert(idx + 1, second);
    }
    Ok(regions)
}

fn split_h(r: Region, cut: usize) -> (Region, Region) {
    (
        Region { x: r.x, y: r.y, w: r.w, h: cut },
        Region { x: r.x, y: r.y + cut, w: r.w, h: r.h - cut },
    )
}

fn split_v(r: Region, cut: usize) -> (Region, Region) {
    (
        Region { x: r.x, y: r.y, w: cut, h: r.h },
        Region { x: r.x + cut, y: r.y, w: r.w - cut, h: r.h },
    )
}

fn too_small(r: Region) -> SynthError {
    SynthError::invalid(
        "split_regions",
        format!("region {}x{} cannot honor the 25% margin on either axis", r.w, r.h),
    )
}
