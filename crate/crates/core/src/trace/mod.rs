//! Viewer traces, tile-grid addressing, FoV/tile overlap and cohort synthesis.

mod geometry;
mod io;
mod synth;

pub use geometry::{
    fov_tile_overlap, fov_tile_overlap_with_density, gop_interest, tile_bounds, Frustum, FovShape,
    OverlapModel, DEFAULT_SAMPLES_PER_AXIS,
};
pub use io::{
    companion_cohort_path, load_traces, read_trace_csv, write_cohort, write_trace_csv, write_traces,
    CohortFile, GenerateSection, TraceRows, ViewerEntry, TRACE_CSV_HEADER,
};
pub use synth::{synthesize_cohort, CohortParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on quality levels; per-tile level sets are stored as `u8` masks.
pub const MAX_LEVELS: usize = 8;

/// Whole-panorama bitrates in Mbps, lowest to highest.
pub const DEFAULT_BITRATES_MBPS: [f64; 6] = [100.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0];

/// Equirectangular tile layout and per-level tile sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileGridSpec {
    pub rows: u16,
    pub cols: u16,
    pub gop_duration_s: f64,
    pub frames_per_gop: u32,
    /// Bytes of one tile for one GoP at each quality level.
    pub level_bytes: Vec<u64>,
}

impl Default for TileGridSpec {
    fn default() -> Self {
        Self::from_video_bitrates(5, 6, 1.0, 30, &DEFAULT_BITRATES_MBPS)
            .expect("default grid is valid")
    }
}

impl TileGridSpec {
    /// Splits whole-video bitrates evenly across the tiles of one GoP.
    pub fn from_video_bitrates(
        rows: u16,
        cols: u16,
        gop_duration_s: f64,
        frames_per_gop: u32,
        bitrates_mbps: &[f64],
    ) -> Result<Self> {
        let tiles = f64::from(rows) * f64::from(cols);
        let level_bytes = bitrates_mbps
            .iter()
            .map(|mbps| (mbps * 1e6 / 8.0 * gop_duration_s / tiles).round() as u64)
            .collect();
        let grid = Self {
            rows,
            cols,
            gop_duration_s,
            frames_per_gop,
            level_bytes,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidGrid("rows and cols must be positive".into()));
        }
        if self.tiles() > 64 {
            return Err(Error::InvalidGrid("at most 64 tiles per segment are supported".into()));
        }
        if self.gop_duration_s.is_nan() || self.gop_duration_s <= 0.0 || self.frames_per_gop == 0 {
            return Err(Error::InvalidGrid("GoP duration and frame count must be positive".into()));
        }
        if self.level_bytes.is_empty() || self.level_bytes.len() > MAX_LEVELS {
            return Err(Error::InvalidGrid(format!(
                "need between 1 and {MAX_LEVELS} quality levels, got {}",
                self.level_bytes.len()
            )));
        }
        if self.level_bytes[0] == 0 {
            return Err(Error::InvalidGrid("tile sizes must be positive".into()));
        }
        if self.level_bytes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("tile sizes must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn tiles(&self) -> usize {
        usize::from(self.rows) * usize::from(self.cols)
    }

    pub fn levels(&self) -> usize {
        self.level_bytes.len()
    }

    pub fn top_level(&self) -> u8 {
        (self.levels() - 1) as u8
    }

    pub fn tile_bytes(&self, level: u8) -> u64 {
        self.level_bytes[usize::from(level)]
    }

    pub fn fps(&self) -> f64 {
        f64::from(self.frames_per_gop) / self.gop_duration_s
    }

    pub fn tile_index(&self, row: u16, col: u16) -> u16 {
        row * self.cols + col
    }

    pub fn row_col(&self, index: u16) -> (u16, u16) {
        (index / self.cols, index % self.cols)
    }

    /// Frames `[first, last]` of a segment.
    pub fn segment_frames(&self, segment: u32) -> std::ops::RangeInclusive<u32> {
        let first = segment * self.frames_per_gop;
        first..=first + self.frames_per_gop - 1
    }
}

/// Head orientation in degrees. Yaw wraps to `[-180, 180)`, pitch is clamped
/// to the poles. Roll is carried along but never used for tile mapping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Orientation {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self {
            yaw: wrap_yaw(yaw),
            pitch: pitch.clamp(-90.0, 90.0),
            roll,
        }
    }

    pub fn yaw_pitch(yaw: f64, pitch: f64) -> Self {
        Self::new(yaw, pitch, 0.0)
    }

    /// Unit view direction: +z forward at yaw 0, +x towards positive yaw, +y up.
    pub fn direction(&self) -> [f64; 3] {
        direction(self.yaw, self.pitch)
    }

    pub fn antipode(&self) -> Self {
        Self::new(self.yaw + 180.0, -self.pitch, self.roll)
    }

    /// Great-circle angle between two view directions, in radians.
    pub fn angle_to(&self, other: &Orientation) -> f64 {
        angle_between(&self.direction(), &other.direction())
    }
}

pub fn wrap_yaw(yaw: f64) -> f64 {
    if (-180.0..180.0).contains(&yaw) {
        return yaw;
    }
    let y = (yaw + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if y >= 180.0 {
        y - 360.0
    } else {
        y
    }
}

pub(crate) fn direction(yaw_deg: f64, pitch_deg: f64) -> [f64; 3] {
    let (sy, cy) = yaw_deg.to_radians().sin_cos();
    let (sp, cp) = pitch_deg.to_radians().sin_cos();
    [cp * sy, sp, cp * cy]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Numerically stable angle between unit vectors.
pub(crate) fn angle_between(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    dot(&cross, &cross).sqrt().atan2(dot(a, b))
}

/// One viewer's head trace plus the latency parameters it joined with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewerTrace {
    pub viewer_id: u32,
    /// Frame index of `poses[0]`; frames are contiguous from there.
    pub first_frame: u32,
    pub poses: Vec<Orientation>,
    pub playback_latency_s: f64,
    pub buffer_s: f64,
    pub device_level: u8,
}

impl ViewerTrace {
    /// `d_i = l_i - b_i`.
    pub fn download_lag_s(&self) -> f64 {
        self.playback_latency_s - self.buffer_s
    }

    pub fn pose(&self, frame: u32) -> Option<&Orientation> {
        let offset = frame.checked_sub(self.first_frame)?;
        self.poses.get(offset as usize)
    }

    pub fn end_frame(&self) -> u32 {
        self.first_frame + self.poses.len() as u32
    }

    /// Poses for frames `[first, last]`, or `None` when any is missing.
    pub fn window(&self, first: u32, last: u32) -> Option<&[Orientation]> {
        if first < self.first_frame || last >= self.end_frame() || last < first {
            return None;
        }
        let a = (first - self.first_frame) as usize;
        let b = (last - self.first_frame) as usize;
        Some(&self.poses[a..=b])
    }

    pub fn check_latency(&self, d_max_s: f64) -> Result<()> {
        if self.buffer_s.is_nan() || self.buffer_s >= self.playback_latency_s {
            return Err(Error::Config(format!(
                "viewer {}: buffer {} s must be shorter than playback latency {} s",
                self.viewer_id, self.buffer_s, self.playback_latency_s
            )));
        }
        let d = self.download_lag_s();
        if d < 0.0 || d > d_max_s + 1e-9 {
            return Err(Error::Config(format!(
                "viewer {}: download lag {d} s outside [0, {d_max_s}]",
                self.viewer_id
            )));
        }
        Ok(())
    }
}

/// Per-tile viewing interest in `[0, 1]` for one segment, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterestMap {
    pub segment: u32,
    pub values: Vec<f64>,
}

impl InterestMap {
    pub fn zeros(segment: u32, tiles: usize) -> Self {
        Self {
            segment,
            values: vec![0.0; tiles],
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Bitmask of tiles with positive interest (the request rule).
    pub fn requested_mask(&self) -> u64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .fold(0u64, |m, (i, _)| m | (1 << i))
    }

    pub fn is_valid(&self, tiles: usize) -> bool {
        self.values.len() == tiles && self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Spatio-temporal tile address: `(segment, row-major tile index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TileKey {
    pub segment: u32,
    pub index: u16,
}

impl TileKey {
    /// Index reserved for the full-panorama base layer of a segment.
    pub const BASE_LAYER: u16 = u16::MAX;

    pub fn new(segment: u32, index: u16) -> Self {
        Self { segment, index }
    }

    pub fn base_layer(segment: u32) -> Self {
        Self {
            segment,
            index: Self::BASE_LAYER,
        }
    }

    pub fn is_base_layer(&self) -> bool {
        self.index == Self::BASE_LAYER
    }
}

/// A tile at one quality level: the unit of caching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TileId {
    pub tile: TileKey,
    pub level: u8,
}

impl TileId {
    pub fn new(segment: u32, index: u16, level: u8) -> Self {
        Self {
            tile: TileKey::new(segment, index),
            level,
        }
    }

    pub fn segment(&self) -> u32 {
        self.tile.segment
    }
}
