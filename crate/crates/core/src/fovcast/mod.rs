//! FoV prediction: truncated linear extrapolation, DTW similarity,
//! collaborative fusion, calibration and the accuracy harness.

mod calibrate;
mod collab;
mod context;
mod dtw;
mod harness;
mod tlp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use calibrate::{candidate_centers, fov_calibrate, CalibrationTable, DEFAULT_LATTICE_STEP_DEG};
pub use collab::{
    colp_long_self_weight, colpb_self_weight, fuse, FovPredictor, FrontView, PredictionRequest,
    COLPB_SELF_WEIGHT_FLOOR,
};
pub use context::{to_steps, CohortContext, ContextParams};
pub use dtw::{dtw_directions, dtw_distance, dtw_similarity, similarity_from_distance, SimilarityScore};
pub use harness::{evaluate_predictors, l2_loss, overlap_ratio, write_accuracy_csv, AccuracyRow, HarnessParams};
pub use tlp::{monotone_suffix_start, tlp_predict};

/// Which predictor drives a run or an accuracy evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Tlp,
    #[serde(rename = "colpb")]
    ColPb,
    #[serde(rename = "colp-long")]
    ColPLong,
    /// Ground-truth passthrough.
    Truth,
    /// Viewport opposite the true one.
    Antipodal,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 5] = [
        PredictorKind::Tlp,
        PredictorKind::ColPb,
        PredictorKind::ColPLong,
        PredictorKind::Truth,
        PredictorKind::Antipodal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Tlp => "tlp",
            PredictorKind::ColPb => "colpb",
            PredictorKind::ColPLong => "colp-long",
            PredictorKind::Truth => "truth",
            PredictorKind::Antipodal => "antipodal",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown predictor `{s}` (expected one of tlp, colpb, colp-long, truth, antipodal)"))
    }
}
