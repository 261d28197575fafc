//! Request schedule and forecasts for one cohort and predictor.
//!
//! Everything here depends only on the traces and the predictor, never on the
//! cache, so one workload is replayed through every policy.
//!
//! Time advances in GoP steps. At step `t` viewer `i` downloads segment
//! `t - D_i` and plays segment `t - L_i`, so it knows its own head trace up to
//! segment `t - L_i - 1`, and viewer `j` has watched segment `s` once
//! `s <= t - L_j - 1`.

use crate::error::Result;
use crate::fovcast::{CohortContext, ContextParams, PredictorKind};
use crate::par::{self, ExecMode};
use crate::trace::{load_traces, synthesize_cohort, CohortParams, ViewerTrace};

use super::config::{DeviceLevels, SimulationConfig};

/// Predicted tiles of one segment for one viewer, made at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    pub segment: u32,
    /// Tiles with positive predicted interest.
    pub mask: u64,
    /// Predicted interest per tile, kept only when impulses are weighted by it.
    pub interest: Option<Vec<f32>>,
}

/// What one viewer does at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewerStep {
    pub viewer: usize,
    /// Segment downloaded at this step, if any.
    pub download: Option<u32>,
    /// Forecasts for the segments still to be downloaded within the horizon;
    /// the first one, when `download` is set, is the request itself.
    pub forecasts: Vec<Forecast>,
    /// Tiles the viewer actually looks at in `download`.
    pub truth_mask: u64,
}

pub struct Workload {
    pub context: CohortContext,
    pub predictor: PredictorKind,
    pub steps: u32,
    pub device_levels: Vec<u8>,
    pub lag: Vec<u32>,
    pub latency: Vec<u32>,
    /// `schedule[t]`, viewers ordered by ascending lag, then id.
    pub schedule: Vec<Vec<ViewerStep>>,
}

/// Builds or loads the cohort a config describes.
pub fn load_cohort(cfg: &SimulationConfig) -> Result<Vec<ViewerTrace>> {
    let mut traces = match &cfg.cohort.trace_path {
        Some(path) => load_traces(path, &cfg.grid)?,
        None => synthesize_cohort(
            &CohortParams {
                n_viewers: cfg.cohort.n_viewers,
                duration_s: cfg.cohort.duration_s,
                correlation: cfg.cohort.correlation,
                seed: cfg.seed,
                buffer_s: cfg.cohort.buffer_s,
                d_max_s: cfg.run.d_max_s,
            },
            &cfg.grid,
        ),
    };
    for t in &traces {
        t.check_latency(cfg.run.d_max_s)?;
    }
    if cfg.cohort.device_levels == DeviceLevels::RoundRobin {
        let levels = cfg.grid.levels();
        for (i, t) in traces.iter_mut().enumerate() {
            t.device_level = (i % levels) as u8;
        }
    }
    Ok(traces)
}

pub fn build_context(cfg: &SimulationConfig, traces: Vec<ViewerTrace>) -> Result<CohortContext> {
    let params = ContextParams {
        fov: cfg.fov.shape(),
        samples_per_axis: cfg.fov.samples_per_axis,
        dtw_stride: cfg.prediction.dtw_stride,
        exec: cfg.run.exec,
    };
    CohortContext::build(traces, &cfg.grid, &params)
}

impl Workload {
    pub fn from_config(cfg: &SimulationConfig) -> Result<Self> {
        let ctx = build_context(cfg, load_cohort(cfg)?)?;
        Ok(Self::build(ctx, cfg))
    }

    pub fn build(context: CohortContext, cfg: &SimulationConfig) -> Self {
        let horizon_steps = cfg.penalty_horizon_s() / cfg.grid.gop_duration_s;
        Self::with_horizon(
            context,
            cfg.prediction.predictor,
            horizon_steps,
            cfg.prediction.impulse_weight == crate::score::ImpulseWeight::Interest,
            cfg.run.exec,
        )
    }

    /// `horizon_steps` bounds how far ahead forecasts are made.
    pub fn with_horizon(
        context: CohortContext,
        predictor: PredictorKind,
        horizon_steps: f64,
        keep_interest: bool,
        exec: ExecMode,
    ) -> Self {
        let n = context.viewers();
        let segments = context.segments();
        let lag: Vec<u32> = (0..n).map(|v| context.lag_steps(v)).collect();
        let latency: Vec<u32> = (0..n).map(|v| context.latency_steps(v)).collect();
        let device_levels: Vec<u8> = context.traces().iter().map(|t| t.device_level).collect();
        let max_lag = lag.iter().copied().max().unwrap_or(0);
        let steps = segments + max_lag;

        let per_viewer: Vec<Vec<ViewerStep>> = par::map_range(exec, n, |u| {
            (0..steps)
                .map(|t| {
                    let known = t.checked_sub(latency[u] + 1);
                    let first = t.checked_sub(lag[u]);
                    let download = first.filter(|s| *s < segments);
                    let mut forecasts = Vec::new();
                    if let Some(first) = first {
                        let last = t.min(segments.saturating_sub(1));
                        for s in first..=last {
                            if f64::from(s + lag[u]) - f64::from(t) > horizon_steps {
                                break;
                            }
                            let front: Vec<usize> = (0..n)
                                .filter(|&j| j != u && s + latency[j] < t)
                                .collect();
                            let map = context.predict(predictor, u, s, known, &front);
                            forecasts.push(Forecast {
                                segment: s,
                                mask: map.requested_mask(),
                                interest: keep_interest.then(|| map.values.iter().map(|v| *v as f32).collect()),
                            });
                        }
                    }
                    let truth_mask = download.map_or(0, |s| context.truth(u, s).requested_mask());
                    ViewerStep {
                        viewer: u,
                        download,
                        forecasts,
                        truth_mask,
                    }
                })
                .collect()
        });

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| (lag[v], context.traces()[v].viewer_id));
        let mut columns: Vec<std::vec::IntoIter<ViewerStep>> = per_viewer.into_iter().map(Vec::into_iter).collect();
        let mut schedule = Vec::with_capacity(steps as usize);
        for _ in 0..steps {
            let mut row: Vec<Option<ViewerStep>> = columns.iter_mut().map(|c| c.next()).collect();
            schedule.push(order.iter().filter_map(|&v| row[v].take()).collect());
        }

        Self {
            context,
            predictor,
            steps,
            device_levels,
            lag,
            latency,
            schedule,
        }
    }

    pub fn viewers(&self) -> usize {
        self.context.viewers()
    }

    /// Viewers whose playback latency ranks in the top `fraction` (rounded up).
    pub fn longest_latency(&self, fraction: f64) -> Vec<bool> {
        let n = self.viewers();
        let k = ((n as f64) * fraction).ceil() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        let traces = self.context.traces();
        order.sort_by(|&a, &b| {
            traces[b]
                .playback_latency_s
                .total_cmp(&traces[a].playback_latency_s)
                .then(traces[a].viewer_id.cmp(&traces[b].viewer_id))
        });
        let mut marked = vec![false; n];
        for &v in order.iter().take(k) {
            marked[v] = true;
        }
        marked
    }
}
