//! FoV frustum membership and tile overlap by equirectangular rasterization.

use serde::{Deserialize, Serialize};

use super::{direction, dot, InterestMap, Orientation, TileGridSpec, ViewerTrace};
use crate::error::{Error, Result};

/// Samples per tile axis used by the simulator (16 x 16 per tile).
pub const DEFAULT_SAMPLES_PER_AXIS: usize = 16;

/// Angular extent of the rectangular viewport.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FovShape {
    pub width_deg: f64,
    pub height_deg: f64,
}

impl Default for FovShape {
    fn default() -> Self {
        Self {
            width_deg: 90.0,
            height_deg: 90.0,
        }
    }
}

impl FovShape {
    /// Angle from the view axis to a viewport corner, radians.
    pub fn corner_radius(&self) -> f64 {
        let tx = (self.width_deg / 2.0).to_radians().tan();
        let ty = (self.height_deg / 2.0).to_radians().tan();
        (tx * tx + ty * ty).sqrt().atan()
    }
}

/// Rectilinear view frustum for one head pose. Roll is ignored.
#[derive(Clone, Copy, Debug)]
pub struct Frustum {
    forward: [f64; 3],
    right: [f64; 3],
    up: [f64; 3],
    tan_half_w: f64,
    tan_half_h: f64,
}

impl Frustum {
    pub fn new(o: &Orientation, fov: &FovShape) -> Self {
        let (sy, cy) = o.yaw.to_radians().sin_cos();
        let (sp, cp) = o.pitch.to_radians().sin_cos();
        Self {
            forward: [cp * sy, sp, cp * cy],
            right: [cy, 0.0, -sy],
            up: [-sp * sy, cp, -sp * cy],
            tan_half_w: (fov.width_deg / 2.0).to_radians().tan(),
            tan_half_h: (fov.height_deg / 2.0).to_radians().tan(),
        }
    }

    pub fn forward(&self) -> &[f64; 3] {
        &self.forward
    }

    #[inline]
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        let z = dot(p, &self.forward);
        if z <= 0.0 {
            return false;
        }
        dot(p, &self.right).abs() <= z * self.tan_half_w && dot(p, &self.up).abs() <= z * self.tan_half_h
    }
}

/// `(yaw_west, yaw_east, pitch_top, pitch_bottom)` of a tile in degrees.
pub fn tile_bounds(grid: &TileGridSpec, row: u16, col: u16) -> (f64, f64, f64, f64) {
    let dw = 360.0 / f64::from(grid.cols);
    let dh = 180.0 / f64::from(grid.rows);
    let west = -180.0 + f64::from(col) * dw;
    let top = 90.0 - f64::from(row) * dh;
    (west, west + dw, top, top - dh)
}

fn tile_samples(grid: &TileGridSpec, row: u16, col: u16, per_axis: usize) -> Vec<[f64; 3]> {
    let (west, east, top, bottom) = tile_bounds(grid, row, col);
    let n = per_axis as f64;
    let mut out = Vec::with_capacity(per_axis * per_axis);
    for j in 0..per_axis {
        let pitch = top - (j as f64 + 0.5) * (top - bottom) / n;
        for i in 0..per_axis {
            let yaw = west + (i as f64 + 0.5) * (east - west) / n;
            out.push(direction(yaw, pitch));
        }
    }
    out
}

/// Fraction of a tile's equirectangular pixel area inside the viewport, using
/// the default sampling density.
pub fn fov_tile_overlap(
    orientation: &Orientation,
    row: u16,
    col: u16,
    fov: &FovShape,
    grid: &TileGridSpec,
) -> f64 {
    fov_tile_overlap_with_density(orientation, row, col, fov, grid, DEFAULT_SAMPLES_PER_AXIS)
}

pub fn fov_tile_overlap_with_density(
    orientation: &Orientation,
    row: u16,
    col: u16,
    fov: &FovShape,
    grid: &TileGridSpec,
    per_axis: usize,
) -> f64 {
    let frustum = Frustum::new(orientation, fov);
    let samples = tile_samples(grid, row, col, per_axis);
    let inside = samples.iter().filter(|p| frustum.contains(p)).count();
    inside as f64 / samples.len() as f64
}

struct TileSampler {
    samples: Vec<[f64; 3]>,
    center: [f64; 3],
    radius: f64,
}

/// Precomputed tile samples for fast per-frame interest maps.
///
/// Tiles whose bounding cap cannot intersect the viewport are skipped; the
/// result is identical to sampling every tile.
pub struct OverlapModel {
    grid: TileGridSpec,
    fov: FovShape,
    tiles: Vec<TileSampler>,
}

impl OverlapModel {
    pub fn new(grid: &TileGridSpec, fov: FovShape) -> Self {
        Self::with_density(grid, fov, DEFAULT_SAMPLES_PER_AXIS)
    }

    pub fn with_density(grid: &TileGridSpec, fov: FovShape, per_axis: usize) -> Self {
        let mut tiles = Vec::with_capacity(grid.tiles());
        for row in 0..grid.rows {
            for col in 0..grid.cols {
                let (west, east, top, bottom) = tile_bounds(grid, row, col);
                let center = direction((west + east) / 2.0, (top + bottom) / 2.0);
                let samples = tile_samples(grid, row, col, per_axis);
                let radius = samples
                    .iter()
                    .map(|s| super::angle_between(&center, s))
                    .fold(0.0, f64::max);
                tiles.push(TileSampler {
                    samples,
                    center,
                    radius,
                });
            }
        }
        Self {
            grid: grid.clone(),
            fov,
            tiles,
        }
    }

    pub fn grid(&self) -> &TileGridSpec {
        &self.grid
    }

    pub fn fov(&self) -> &FovShape {
        &self.fov
    }

    /// Writes the per-tile overlap at `o` into `out` (length = tile count).
    pub fn overlap_into(&self, o: &Orientation, out: &mut [f64]) {
        let frustum = Frustum::new(o, &self.fov);
        let reach = self.fov.corner_radius();
        for (tile, slot) in self.tiles.iter().zip(out.iter_mut()) {
            let bound = reach + tile.radius;
            if bound < std::f64::consts::PI && dot(frustum.forward(), &tile.center) < bound.cos() {
                *slot = 0.0;
                continue;
            }
            let inside = tile.samples.iter().filter(|p| frustum.contains(p)).count();
            *slot = inside as f64 / tile.samples.len() as f64;
        }
    }

    pub fn interest_at(&self, o: &Orientation, segment: u32) -> InterestMap {
        let mut m = InterestMap::zeros(segment, self.grid.tiles());
        self.overlap_into(o, &mut m.values);
        m
    }

    /// Mean per-frame overlap over the frames of `segment`.
    pub fn gop_interest(&self, trace: &ViewerTrace, segment: u32) -> Result<InterestMap> {
        let frames = self.grid.segment_frames(segment);
        let mut acc = InterestMap::zeros(segment, self.grid.tiles());
        let mut frame_map = vec![0.0; self.grid.tiles()];
        let n = f64::from(self.grid.frames_per_gop);
        for frame in frames {
            let pose = trace.pose(frame).ok_or(Error::MissingFrames {
                viewer: trace.viewer_id,
                segment,
                frame,
            })?;
            self.overlap_into(pose, &mut frame_map);
            for (a, v) in acc.values.iter_mut().zip(&frame_map) {
                *a += v;
            }
        }
        for a in &mut acc.values {
            *a = (*a / n).clamp(0.0, 1.0);
        }
        Ok(acc)
    }
}

/// Per-tile mean overlap across the frames of one GoP.
pub fn gop_interest(
    trace: &ViewerTrace,
    segment: u32,
    grid: &TileGridSpec,
    fov: &FovShape,
) -> Result<InterestMap> {
    OverlapModel::new(grid, *fov).gop_interest(trace, segment)
}
