//! FoV calibration: snap a tile-weight map to the single viewport that covers
//! the most weight.

use crate::trace::{tile_bounds, FovShape, InterestMap, Orientation, OverlapModel, TileGridSpec};

/// Default lattice step for candidate viewport centres, degrees.
pub const DEFAULT_LATTICE_STEP_DEG: f64 = 5.0;

/// Candidate viewport centres: every tile centre plus a yaw/pitch lattice,
/// sorted by `(yaw, pitch)` so that ties resolve to the smallest yaw, then the
/// smallest pitch.
pub fn candidate_centers(grid: &TileGridSpec, step_deg: f64) -> Vec<Orientation> {
    let mut out = Vec::new();
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let (w, e, t, b) = tile_bounds(grid, row, col);
            out.push(Orientation::yaw_pitch((w + e) / 2.0, (t + b) / 2.0));
        }
    }
    let ny = (360.0 / step_deg).round() as i64;
    let np = (180.0 / step_deg).round() as i64;
    for iy in 0..ny {
        for ip in 0..=np {
            out.push(Orientation::yaw_pitch(-180.0 + iy as f64 * step_deg, -90.0 + ip as f64 * step_deg));
        }
    }
    out.sort_by(|a, b| a.yaw.total_cmp(&b.yaw).then(a.pitch.total_cmp(&b.pitch)));
    out.dedup_by(|a, b| a.yaw == b.yaw && a.pitch == b.pitch);
    out
}

/// Overlap maps for every candidate centre, stored tile-major so that a
/// weight map can be scored against all candidates in one pass.
pub struct CalibrationTable {
    tiles: usize,
    centers: Vec<Orientation>,
    /// `columns[t][c]` = overlap of candidate `c` with tile `t`.
    columns: Vec<Vec<f64>>,
}

impl CalibrationTable {
    pub fn new(model: &OverlapModel, step_deg: f64) -> Self {
        let grid = model.grid();
        let centers = candidate_centers(grid, step_deg);
        let tiles = grid.tiles();
        let mut columns = vec![vec![0.0; centers.len()]; tiles];
        let mut buf = vec![0.0; tiles];
        for (c, center) in centers.iter().enumerate() {
            model.overlap_into(center, &mut buf);
            for (t, v) in buf.iter().enumerate() {
                columns[t][c] = *v;
            }
        }
        Self {
            tiles,
            centers,
            columns,
        }
    }

    pub fn centers(&self) -> &[Orientation] {
        &self.centers
    }

    pub fn candidate_map(&self, c: usize, segment: u32) -> InterestMap {
        InterestMap {
            segment,
            values: (0..self.tiles).map(|t| self.columns[t][c]).collect(),
        }
    }

    /// Overlap-weighted sum of `weights` covered by every candidate.
    pub fn covered_weights(&self, weights: &InterestMap) -> Vec<f64> {
        let mut acc = vec![0.0; self.centers.len()];
        for (t, &w) in weights.values.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (a, ov) in acc.iter_mut().zip(&self.columns[t]) {
                *a += w * ov;
            }
        }
        acc
    }

    /// Index and covered weight of the best candidate (first maximum).
    pub fn best(&self, weights: &InterestMap) -> (usize, f64) {
        let covered = self.covered_weights(weights);
        let mut best = (0, covered[0]);
        for (c, v) in covered.iter().enumerate().skip(1) {
            if *v > best.1 {
                best = (c, *v);
            }
        }
        best
    }

    pub fn calibrate(&self, weights: &InterestMap) -> InterestMap {
        let (c, _) = self.best(weights);
        self.candidate_map(c, weights.segment)
    }
}

/// One-shot calibration; builds the candidate table on every call.
pub fn fov_calibrate(weights: &InterestMap, fov: &FovShape, grid: &TileGridSpec) -> InterestMap {
    let model = OverlapModel::new(grid, *fov);
    CalibrationTable::new(&model, DEFAULT_LATTICE_STEP_DEG).calibrate(weights)
}
