//! Spectral decomposition of a sequence of binary segmentations.
//!
//! Each component is the finite difference of consecutive masks along the
//! scale axis. An object that enters the segmentation in a single step (a TV
//! eigenfunction) therefore shows up as one component and one peak of the
//! response `S`.
//!
//! Components are numbered from 1. In the inverse direction component `k` is
//! `u_k − u_{k−1}` with `u_0 = 0`, so it matches mask number `k`. In the
//! forward direction the masks are walked from the smallest weight upward and
//! component `k` is `u_{(k)} − u_{(k+1)}`, positive where an object vanishes,
//! with an empty mask appended after the largest weight.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Bregman iteration: objects appear as the step index grows.
    Inverse,
    /// Weight sweep: objects vanish as the weight grows.
    Forward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Inverse => "inverse",
            Direction::Forward => "forward",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(Direction::Inverse),
            "forward" => Ok(Direction::Forward),
            other => Err(Error::Domain(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralComponent {
    /// 1-based scale index.
    pub k: usize,
    /// Values in {−1, 0, +1}.
    pub phi: ImageGrid,
    /// `Σ|phi|`, the number of pixels that changed.
    pub response: f64,
}

/// Differences of consecutive binary masks; see the module docs for the
/// ordering in each direction.
pub fn transform(masks: &[ImageGrid], direction: Direction) -> Result<Vec<SpectralComponent>> {
    let Some(first) = masks.first() else {
        return Err(Error::Sequence(
            "need at least one mask besides the implicit empty state".into(),
        ));
    };
    for m in masks {
        first.ensure_same_extent(m)?;
        if !m.is_binary() {
            return Err(Error::Sequence("masks must be binary".into()));
        }
    }
    let (w, h) = first.extent();
    let empty = ImageGrid::zeros(w, h);

    // `states` runs along the axis on which components are numbered.
    let states: Vec<&ImageGrid> = match direction {
        Direction::Inverse => std::iter::once(&empty).chain(masks.iter()).collect(),
        Direction::Forward => masks.iter().rev().chain(std::iter::once(&empty)).collect(),
    };
    let sign = match direction {
        Direction::Inverse => 1.0,
        Direction::Forward => -1.0,
    };
    Ok(states
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let phi = pair[1].zip_map(pair[0], |next, cur| sign * (next - cur));
            let response = phi.values().iter().map(|v| v.abs()).sum();
            SpectralComponent {
                k: i + 1,
                phi,
                response,
            }
        })
        .collect())
}

pub fn response(components: &[SpectralComponent]) -> Vec<f64> {
    components.iter().map(|c| c.response).collect()
}

/// Per-pixel index of the first component with `phi = +1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleMap {
    width: usize,
    height: usize,
    /// 0 where the pixel never enters.
    pub appearance_index: Vec<u32>,
    /// Pixels with more than one nonzero component (entered and left, or
    /// re-entered).
    pub reworked: Vec<bool>,
}

impl ScaleMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.appearance_index[row * self.width + col]
    }

    pub fn max_index(&self) -> u32 {
        self.appearance_index.iter().copied().max().unwrap_or(0)
    }

    pub fn rework_count(&self) -> usize {
        self.reworked.iter().filter(|&&r| r).count()
    }

    pub fn to_grid(&self) -> ImageGrid {
        ImageGrid::new(
            self.width,
            self.height,
            self.appearance_index.iter().map(|&v| v as f64).collect(),
        )
        .expect("scale map extent is valid")
    }

    /// Most frequent nonzero index over the pixels of `region`, ties broken
    /// toward the earlier index. `None` if no pixel of the region ever entered.
    pub fn dominant_index(&self, region: &ImageGrid) -> Option<u32> {
        let mut counts = std::collections::BTreeMap::new();
        for (&idx, &r) in self.appearance_index.iter().zip(region.values()) {
            if r >= 0.5 && idx > 0 {
                *counts.entry(idx).or_insert(0usize) += 1;
            }
        }
        counts
            .into_iter()
            .fold(None, |best: Option<(u32, usize)>, (idx, n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((idx, n)),
            })
            .map(|(idx, _)| idx)
    }

    /// Fraction of `region` pixels whose index equals the region's dominant index.
    pub fn dominant_fraction(&self, region: &ImageGrid) -> f64 {
        let total = region.count_foreground();
        if total == 0 {
            return 0.0;
        }
        let Some(dom) = self.dominant_index(region) else {
            return 0.0;
        };
        let hits = self
            .appearance_index
            .iter()
            .zip(region.values())
            .filter(|(&idx, &r)| r >= 0.5 && idx == dom)
            .count();
        hits as f64 / total as f64
    }

    /// Distinct nonzero indices over the pixels of `region`.
    pub fn distinct_indices(&self, region: &ImageGrid) -> Vec<u32> {
        let set: std::collections::BTreeSet<u32> = self
            .appearance_index
            .iter()
            .zip(region.values())
            .filter(|(&idx, &r)| r >= 0.5 && idx > 0)
            .map(|(&idx, _)| idx)
            .collect();
        set.into_iter().collect()
    }
}

pub fn scale_map(components: &[SpectralComponent]) -> Result<ScaleMap> {
    let Some(first) = components.first() else {
        return Err(Error::Sequence("no components".into()));
    };
    let (width, height) = first.phi.extent();
    let n = width * height;
    let mut appearance_index = vec![0u32; n];
    let mut changes = vec![0u32; n];
    for c in components {
        first.phi.ensure_same_extent(&c.phi)?;
        for (px, &v) in c.phi.values().iter().enumerate() {
            if v != 0.0 {
                changes[px] += 1;
                if v > 0.0 && appearance_index[px] == 0 {
                    appearance_index[px] = c.k as u32;
                }
            }
        }
    }
    Ok(ScaleMap {
        width,
        height,
        appearance_index,
        reworked: changes.into_iter().map(|c| c > 1).collect(),
    })
}

pub const DEFAULT_MIN_MASS_FRACTION: f64 = 0.02;

/// Positions `k` where `s[k] >= min_mass_fraction · Σs` and `s[k]` is a local
/// maximum; a run of equal qualifying neighbours reports its first position.
pub fn detect_peaks(s: &[f64], min_mass_fraction: f64) -> Vec<usize> {
    let total: f64 = s.iter().sum();
    if total <= 0.0 {
        return vec![];
    }
    let floor = min_mass_fraction * total;
    let n = s.len();
    let qualifies = |k: usize| {
        let left = if k > 0 { s[k - 1] } else { f64::NEG_INFINITY };
        let right = if k + 1 < n { s[k + 1] } else { f64::NEG_INFINITY };
        s[k] > 0.0 && s[k] >= floor && s[k] >= left && s[k] >= right
    };
    let mut peaks: Vec<usize> = Vec::new();
    for k in (0..n).filter(|&k| qualifies(k)) {
        match peaks.last() {
            // adjacent qualifying positions merge to the larger value
            Some(&prev) if prev + 1 == k => {
                if s[k] > s[prev] {
                    *peaks.last_mut().unwrap() = k;
                }
            }
            _ => peaks.push(k),
        }
    }
    peaks
}

/// Sum of `s` over the contiguous run around `peak` whose entries are at
/// least `min_mass_fraction · Σs`. Splits an object that enters across two
/// neighbouring steps back into one mass.
pub fn peak_mass(s: &[f64], peak: usize, min_mass_fraction: f64) -> f64 {
    let floor = min_mass_fraction * s.iter().sum::<f64>();
    let mut lo = peak;
    while lo > 0 && s[lo - 1] >= floor && s[lo - 1] > 0.0 && s[lo - 1] <= s[lo] {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < s.len() && s[hi + 1] >= floor && s[hi + 1] > 0.0 && s[hi + 1] <= s[hi] {
        hi += 1;
    }
    s[lo..=hi].iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredScales {
    /// `Σ_{k ∈ band} phi_k`.
    pub signed: ImageGrid,
    /// `signed` clamped to {0, 1}.
    pub mask: ImageGrid,
}

/// Recombines the components whose index lies in `band`.
pub fn filter_scales(components: &[SpectralComponent], band: impl Fn(usize) -> bool) -> Result<FilteredScales> {
    let Some(first) = components.first() else {
        return Err(Error::Sequence("no components".into()));
    };
    let mut signed = ImageGrid::zeros(first.phi.width(), first.phi.height());
    for c in components.iter().filter(|c| band(c.k)) {
        signed.ensure_same_extent(&c.phi)?;
        for (acc, &v) in signed.values_mut().iter_mut().zip(c.phi.values()) {
            *acc += v;
        }
    }
    let mask = signed.map(|v| if v >= 0.5 { 1.0 } else { 0.0 });
    Ok(FilteredScales { signed, mask })
}
