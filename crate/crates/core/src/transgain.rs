//! Transcoding-aware caching gain.
//!
//! Caching a tile at level `j` saves `P_j * w(j) * B_c` of downloads. It also
//! lets every uncached level below the highest cached one be produced by
//! transcoding, which saves `P_k * (w(k) * B_c - T_k)` when that is positive.
//! The unit gain of a level is the marginal change of that total per byte.
//!
//! Level sets are `u8` bitmasks, bit `k` standing for level `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TileGridSpec;

/// Egress price used for every download, dollars per GB (1e9 bytes).
pub const AWS_DOWNLOAD_USD_PER_GB: f64 = 0.09;

/// Per-minute transcoding prices for the SD, HD and 4K tiers.
pub const AWS_TRANSCODE_USD_PER_MIN: [f64; 3] = [0.0113, 0.0225, 0.045];

/// How the per-level transcoding price is derived before `td_scale` applies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranscodePricing {
    /// Tiered per-minute rates prorated to one GoP.
    #[default]
    Aws,
    /// `T_k = w(k) * B_c`, so `td_scale` is exactly the T/D ratio.
    Relative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    pub download_usd_per_byte: f64,
    /// Unscaled price of one transcode to each level, per tile-GoP.
    pub transcode_base_usd: Vec<f64>,
    pub td_scale: f64,
}

/// Price tier of `level` when `levels` levels are split evenly over SD/HD/4K.
pub fn aws_tier(level: usize, levels: usize) -> usize {
    (level * AWS_TRANSCODE_USD_PER_MIN.len() / levels.max(1)).min(AWS_TRANSCODE_USD_PER_MIN.len() - 1)
}

impl CostModel {
    pub fn new(pricing: TranscodePricing, grid: &TileGridSpec, td_scale: f64) -> Self {
        match pricing {
            TranscodePricing::Aws => Self::aws(grid).with_td_scale(td_scale),
            TranscodePricing::Relative => Self::relative(grid, td_scale),
        }
    }

    pub fn aws(grid: &TileGridSpec) -> Self {
        let levels = grid.levels();
        let minutes = grid.gop_duration_s / 60.0;
        Self {
            download_usd_per_byte: AWS_DOWNLOAD_USD_PER_GB / 1e9,
            transcode_base_usd: (0..levels)
                .map(|k| AWS_TRANSCODE_USD_PER_MIN[aws_tier(k, levels)] * minutes)
                .collect(),
            td_scale: 1.0,
        }
    }

    pub fn relative(grid: &TileGridSpec, ratio: f64) -> Self {
        let b_c = AWS_DOWNLOAD_USD_PER_GB / 1e9;
        Self {
            download_usd_per_byte: b_c,
            transcode_base_usd: grid.level_bytes.iter().map(|w| *w as f64 * b_c).collect(),
            td_scale: ratio,
        }
    }

    pub fn with_td_scale(mut self, td_scale: f64) -> Self {
        self.td_scale = td_scale;
        self
    }

    /// `T_k` after scaling.
    pub fn transcode_usd(&self, level: u8) -> f64 {
        self.transcode_base_usd[usize::from(level)] * self.td_scale
    }

    pub fn download_usd(&self, bytes: f64) -> f64 {
        bytes * self.download_usd_per_byte
    }

    /// The transcode branch of the access path: `T_r < w(r) * B_c`.
    pub fn transcoding_pays(&self, level: u8, bytes: f64) -> bool {
        self.transcode_usd(level) < self.download_usd(bytes)
    }
}

pub fn mask_of(levels: &[u8]) -> u8 {
    levels.iter().fold(0u8, |m, l| m | (1 << l))
}

pub fn levels_of(mask: u8) -> impl Iterator<Item = u8> {
    (0..8u8).filter(move |l| mask & (1 << l) != 0)
}

/// Highest level in `mask`; `None` for the empty set.
pub fn pivot(mask: u8) -> Option<u8> {
    (mask != 0).then(|| 7 - mask.leading_zeros() as u8)
}

/// Levels below the pivot of `levels` that are not themselves in it.
pub fn covered_set(levels: u8) -> u8 {
    match pivot(levels) {
        Some(p) => ((1u16 << p) - 1) as u8 & !levels,
        None => 0,
    }
}

fn transcode_term(k: u8, p: &[f64], cost: &CostModel, w: &[f64]) -> f64 {
    let k_us = usize::from(k);
    (p[k_us] * (w[k_us] * cost.download_usd_per_byte - cost.transcode_usd(k))).max(0.0)
}

/// Total caching gain of holding `levels` of one tile.
pub fn total_gain(levels: u8, p: &[f64], cost: &CostModel, w: &[f64]) -> f64 {
    let direct: f64 = levels_of(levels)
        .map(|j| p[usize::from(j)] * w[usize::from(j)] * cost.download_usd_per_byte)
        .sum();
    let covered: f64 = levels_of(covered_set(levels))
        .map(|k| transcode_term(k, p, cost, w))
        .sum();
    direct + covered
}

/// Unit gain of adding level `r` to the cached set `r_in`, dollars per byte.
pub fn marginal_unit_gain(r: u8, r_in: u8, p: &[f64], cost: &CostModel, w: &[f64]) -> Result<f64> {
    if r_in & (1 << r) != 0 {
        return Err(Error::LevelAlreadyCached(r));
    }
    let with = total_gain(r_in | (1 << r), p, cost, w);
    let without = total_gain(r_in, p, cost, w);
    Ok((with - without) / w[usize::from(r)])
}

/// The same quantity through its two closed forms: a higher level is already
/// cached, or `r` becomes the new highest level.
pub fn closed_form_unit_gain(r: u8, r_in: u8, p: &[f64], cost: &CostModel, w: &[f64]) -> f64 {
    let r_us = usize::from(r);
    let b_c = cost.download_usd_per_byte;
    let higher = r_in & !(((1u16 << (r + 1)) - 1) as u8);
    if higher != 0 {
        let t_unit = cost.transcode_usd(r) / w[r_us];
        p[r_us] * b_c - p[r_us] * (b_c - t_unit).max(0.0)
    } else {
        let gained = covered_set(r_in | (1 << r)) & !covered_set(r_in);
        let extra: f64 = levels_of(gained).map(|k| transcode_term(k, p, cost, w)).sum();
        p[r_us] * b_c + extra / w[r_us]
    }
}
