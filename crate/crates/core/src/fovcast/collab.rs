//! Collaborative fusion of a viewer's own extrapolated FoV with the observed
//! FoVs of viewers further ahead in playback.

use crate::error::Result;
use crate::trace::{InterestMap, Orientation, OverlapModel};

use super::calibrate::{CalibrationTable, DEFAULT_LATTICE_STEP_DEG};
use super::tlp::tlp_predict;

/// Lower bound on the self weight used by ColPB.
pub const COLPB_SELF_WEIGHT_FLOOR: f64 = 0.8;

/// A viewer that has already watched the target segment.
#[derive(Clone, Copy, Debug)]
pub struct FrontView<'a> {
    pub viewer_id: u32,
    pub similarity: f64,
    pub truth: &'a InterestMap,
}

#[derive(Clone, Debug)]
pub struct PredictionRequest<'a> {
    pub viewer_id: u32,
    pub segment: u32,
    /// Poses up to the last frame the viewer has played.
    pub history: &'a [Orientation],
    /// From the last played frame to the middle of the target segment.
    pub horizon_s: f64,
    pub front: Vec<FrontView<'a>>,
}

pub fn colpb_self_weight(similarity_sum: f64) -> f64 {
    (1.0 / (1.0 + similarity_sum)).max(COLPB_SELF_WEIGHT_FLOOR)
}

pub fn colp_long_self_weight(similarity_sum: f64) -> f64 {
    1.0 / (1.0 + similarity_sum)
}

/// `ws * own + (1 - ws) * similarity-weighted mean of the front truths`.
pub fn fuse(ws: f64, own: &InterestMap, front: &[FrontView<'_>]) -> InterestMap {
    let total: f64 = front.iter().map(|f| f.similarity).sum();
    if front.is_empty() || total <= 0.0 {
        return own.clone();
    }
    let mut out = own.clone();
    for v in &mut out.values {
        *v *= ws;
    }
    for f in front {
        let k = (1.0 - ws) * f.similarity / total;
        for (o, t) in out.values.iter_mut().zip(&f.truth.values) {
            *o += k * t;
        }
    }
    for v in &mut out.values {
        *v = v.clamp(0.0, 1.0);
    }
    out
}

/// TLP, ColPB and ColP-Long over a shared overlap model.
pub struct FovPredictor {
    model: OverlapModel,
    table: CalibrationTable,
    /// TLP truncation window in frames.
    window: usize,
}

impl FovPredictor {
    pub fn new(model: OverlapModel) -> Self {
        let table = CalibrationTable::new(&model, DEFAULT_LATTICE_STEP_DEG);
        let window = model.grid().frames_per_gop as usize;
        Self {
            model,
            table,
            window,
        }
    }

    pub fn model(&self) -> &OverlapModel {
        &self.model
    }

    pub fn table(&self) -> &CalibrationTable {
        &self.table
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn tlp_pose(&self, req: &PredictionRequest<'_>) -> Result<Orientation> {
        tlp_predict(req.history, self.window, self.model.grid().fps(), req.horizon_s)
    }

    /// Overlap map at the TLP-predicted pose.
    pub fn tlp_map(&self, req: &PredictionRequest<'_>) -> Result<InterestMap> {
        let pose = self.tlp_pose(req)?;
        Ok(self.model.interest_at(&pose, req.segment))
    }

    pub fn colpb_predict(&self, req: &PredictionRequest<'_>) -> Result<InterestMap> {
        let own = self.tlp_map(req)?;
        let ws = colpb_self_weight(req.front.iter().map(|f| f.similarity).sum());
        Ok(fuse(ws, &own, &req.front))
    }

    pub fn colp_long_predict(&self, req: &PredictionRequest<'_>) -> Result<InterestMap> {
        let own = self.tlp_map(req)?;
        Ok(self.colp_long_from(&own, &req.front))
    }

    /// ColP-Long given an already computed own-trajectory map.
    pub fn colp_long_from(&self, own: &InterestMap, front: &[FrontView<'_>]) -> InterestMap {
        let ws = colp_long_self_weight(front.iter().map(|f| f.similarity).sum());
        let fused = fuse(ws, own, front);
        self.table.calibrate(&fused)
    }
}
