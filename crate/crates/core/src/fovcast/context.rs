//! Per-cohort prediction context: ground-truth interest maps, pairwise
//! trajectory similarity and the shared predictor, computed once per cohort.

use crate::error::{Error, Result};
use crate::par::{self, ExecMode};
use crate::trace::{FovShape, InterestMap, Orientation, OverlapModel, TileGridSpec, ViewerTrace};

use super::collab::{FovPredictor, FrontView};
use super::dtw::{dtw_directions, similarity_from_distance};
use super::PredictorKind;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContextParams {
    pub fov: FovShape,
    pub samples_per_axis: usize,
    /// Every `dtw_stride`-th frame of the last second enters the DTW.
    pub dtw_stride: usize,
    pub exec: ExecMode,
}

impl Default for ContextParams {
    fn default() -> Self {
        Self {
            fov: FovShape::default(),
            samples_per_axis: crate::trace::DEFAULT_SAMPLES_PER_AXIS,
            dtw_stride: 3,
            exec: ExecMode::default(),
        }
    }
}

/// Rounds a latency in seconds to whole GoP steps.
pub fn to_steps(seconds: f64, gop_s: f64) -> u32 {
    (seconds / gop_s).round().max(0.0) as u32
}

pub struct CohortContext {
    grid: TileGridSpec,
    predictor: FovPredictor,
    traces: Vec<ViewerTrace>,
    segments: u32,
    /// `truth[viewer][segment]`
    truth: Vec<Vec<InterestMap>>,
    /// `similarity[segment][a * n + b]`
    similarity: Vec<Vec<f64>>,
}

impl CohortContext {
    pub fn build(traces: Vec<ViewerTrace>, grid: &TileGridSpec, params: &ContextParams) -> Result<Self> {
        grid.validate()?;
        if traces.is_empty() {
            return Err(Error::Config("cohort has no viewers".into()));
        }
        let fpg = grid.frames_per_gop;
        if let Some(t) = traces.iter().find(|t| t.first_frame != 0) {
            return Err(Error::Config(format!(
                "viewer {} trace starts at frame {}, expected 0",
                t.viewer_id, t.first_frame
            )));
        }
        let segments = traces.iter().map(|t| t.end_frame() / fpg).min().unwrap_or(0);
        let model = OverlapModel::with_density(grid, params.fov, params.samples_per_axis);

        let truth = par::map(params.exec, &traces, |t| {
            (0..segments).map(|s| model.gop_interest(t, s)).collect::<Result<Vec<_>>>()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let stride = params.dtw_stride.max(1);
        let dirs: Vec<Vec<Vec<[f64; 3]>>> = par::map(params.exec, &traces, |t| {
            (0..segments)
                .map(|s| {
                    grid.segment_frames(s)
                        .step_by(stride)
                        .map(|f| t.pose(f).map(Orientation::direction).unwrap_or([0.0, 0.0, 1.0]))
                        .collect()
                })
                .collect()
        });
        let n = traces.len();
        let similarity = par::map_range(params.exec, segments as usize, |s| {
            let mut m = vec![1.0; n * n];
            for a in 0..n {
                for b in a + 1..n {
                    let d = dtw_directions(&dirs[a][s], &dirs[b][s]).unwrap_or(f64::INFINITY);
                    let v = similarity_from_distance(d);
                    m[a * n + b] = v;
                    m[b * n + a] = v;
                }
            }
            m
        });

        Ok(Self {
            grid: grid.clone(),
            predictor: FovPredictor::new(model),
            traces,
            segments,
            truth,
            similarity,
        })
    }

    pub fn grid(&self) -> &TileGridSpec {
        &self.grid
    }

    pub fn predictor(&self) -> &FovPredictor {
        &self.predictor
    }

    pub fn traces(&self) -> &[ViewerTrace] {
        &self.traces
    }

    pub fn viewers(&self) -> usize {
        self.traces.len()
    }

    /// Number of complete segments every viewer's trace covers.
    pub fn segments(&self) -> u32 {
        self.segments
    }

    pub fn truth(&self, viewer: usize, segment: u32) -> &InterestMap {
        &self.truth[viewer][segment as usize]
    }

    /// Similarity of two viewers' trajectories over the same segment.
    pub fn similarity(&self, segment: u32, a: usize, b: usize) -> f64 {
        self.similarity[segment as usize][a * self.traces.len() + b]
    }

    /// Download lag `D_i` in GoP steps.
    pub fn lag_steps(&self, viewer: usize) -> u32 {
        to_steps(self.traces[viewer].download_lag_s(), self.grid.gop_duration_s)
    }

    /// Buffer `B_i` in GoP steps, at least one.
    pub fn buffer_steps(&self, viewer: usize) -> u32 {
        to_steps(self.traces[viewer].buffer_s, self.grid.gop_duration_s).max(1)
    }

    /// Playback latency `L_i = D_i + B_i` in GoP steps.
    pub fn latency_steps(&self, viewer: usize) -> u32 {
        self.lag_steps(viewer) + self.buffer_steps(viewer)
    }

    /// Predicts `viewer`'s interest in `segment` when its last fully played
    /// segment is `known` (`None` before playback starts) and `front` lists
    /// the viewers that already watched `segment`.
    ///
    /// Without history the own-trajectory branch falls back to the pose
    /// `(0, 0)` and the collaborative kinds rely on the front viewers alone.
    pub fn predict(
        &self,
        kind: PredictorKind,
        viewer: usize,
        segment: u32,
        known: Option<u32>,
        front: &[usize],
    ) -> InterestMap {
        match kind {
            PredictorKind::Truth => return self.truth(viewer, segment).clone(),
            PredictorKind::Antipodal => {
                let fpg = self.grid.frames_per_gop;
                let mid = segment * fpg + fpg / 2;
                let pose = self.traces[viewer].pose(mid).copied().unwrap_or_default();
                return self.predictor.model().interest_at(&pose.antipode(), segment);
            }
            _ => {}
        }
        let own = match known.and_then(|k| self.own_map(viewer, segment, k)) {
            Some(m) => m,
            None => {
                let fallback = self.predictor.model().interest_at(&Orientation::default(), segment);
                let views: Vec<_> = front
                    .iter()
                    .map(|&j| FrontView {
                        viewer_id: self.traces[j].viewer_id,
                        similarity: 1.0,
                        truth: self.truth(j, segment),
                    })
                    .collect();
                return match kind {
                    PredictorKind::Tlp => fallback,
                    PredictorKind::ColPb => super::collab::fuse(0.0, &fallback, &views),
                    _ => {
                        let fused = super::collab::fuse(0.0, &fallback, &views);
                        self.predictor.table().calibrate(&fused)
                    }
                };
            }
        };
        let k = known.unwrap_or(0);
        let views: Vec<_> = front
            .iter()
            .map(|&j| FrontView {
                viewer_id: self.traces[j].viewer_id,
                similarity: self.similarity(k, viewer, j),
                truth: self.truth(j, segment),
            })
            .collect();
        match kind {
            PredictorKind::Tlp => own,
            PredictorKind::ColPb => {
                let ws = super::collab::colpb_self_weight(views.iter().map(|f| f.similarity).sum());
                super::collab::fuse(ws, &own, &views)
            }
            _ => self.predictor.colp_long_from(&own, &views),
        }
    }

    /// TLP map for `segment` from the history ending with segment `known`.
    fn own_map(&self, viewer: usize, segment: u32, known: u32) -> Option<InterestMap> {
        if known >= segment || known >= self.segments {
            return None;
        }
        let fpg = self.grid.frames_per_gop;
        let last = (known + 1) * fpg - 1;
        let history = self.traces[viewer].window(0, last)?;
        let ahead = (segment - known - 1) * fpg + fpg / 2 + 1;
        let horizon_s = f64::from(ahead) / self.grid.fps();
        let req = super::collab::PredictionRequest {
            viewer_id: self.traces[viewer].viewer_id,
            segment,
            history,
            horizon_s,
            front: Vec::new(),
        };
        self.predictor.tlp_map(&req).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{synthesize_cohort, CohortParams};

    fn ctx(correlation: f64) -> CohortContext {
        let grid = TileGridSpec::default();
        let params = CohortParams {
            n_viewers: 6,
            duration_s: 12.0,
            correlation,
            seed: 3,
            ..CohortParams::default()
        };
        let traces = synthesize_cohort(&params, &grid);
        CohortContext::build(traces, &grid, &ContextParams::default()).unwrap()
    }

    #[test]
    fn builds_truth_and_symmetric_similarity() {
        let c = ctx(0.5);
        assert_eq!(c.segments(), 12);
        for s in 0..c.segments() {
            for a in 0..6 {
                assert_eq!(c.similarity(s, a, a), 1.0);
                assert!(c.truth(a, s).is_valid(30));
                for b in 0..6 {
                    assert_eq!(c.similarity(s, a, b), c.similarity(s, b, a));
                }
            }
        }
    }

    #[test]
    fn identical_viewers_have_unit_similarity() {
        let c = ctx(1.0);
        assert_eq!(c.similarity(4, 0, 5), 1.0);
    }

    #[test]
    fn modes_agree() {
        let grid = TileGridSpec::default();
        let params = CohortParams {
            n_viewers: 4,
            duration_s: 5.0,
            seed: 8,
            ..CohortParams::default()
        };
        let traces = synthesize_cohort(&params, &grid);
        let seq = ContextParams {
            exec: ExecMode::Sequential,
            ..ContextParams::default()
        };
        let a = CohortContext::build(traces.clone(), &grid, &seq).unwrap();
        let b = CohortContext::build(traces, &grid, &ContextParams::default()).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.similarity, b.similarity);
    }

    #[test]
    fn predictions_are_valid_maps() {
        let c = ctx(0.8);
        for kind in PredictorKind::ALL {
            for known in [None, Some(2), Some(6)] {
                let m = c.predict(kind, 2, 8, known, &[0, 1]);
                assert!(m.is_valid(30), "{kind:?} {known:?}");
            }
        }
        assert_eq!(c.predict(PredictorKind::Truth, 2, 8, Some(6), &[]), *c.truth(2, 8));
    }
}
