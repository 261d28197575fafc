//! Replays a workload through one caching policy.

use crate::cache::{Cache, Request};
use crate::error::Result;
use crate::score::{Penalty, RequestForecast, ScoreBook};
use crate::trace::TileKey;

use super::config::SimulationConfig;
use super::ledger::CostLedger;
use super::metrics::{summarize, AccessRecord, InterestRecord, MetricsReport};
use super::workload::Workload;

/// Everything one run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub ledger: CostLedger,
    pub log: Vec<AccessRecord>,
    pub interest: Vec<InterestRecord>,
}

/// Generates the workload a config describes and replays it.
pub fn run(cfg: &SimulationConfig) -> Result<RunOutput> {
    let workload = Workload::from_config(cfg)?;
    Ok(replay(&workload, cfg))
}

fn tiles_of(mask: u64) -> impl Iterator<Item = u16> {
    (0..64u16).filter(move |i| mask >> i & 1 == 1)
}

/// Replays `w` with the cache, cost and run settings of `cfg`. The workload's
/// predictor is used as is; `cfg.prediction` only sets the impulse weighting.
pub fn replay(w: &Workload, cfg: &SimulationConfig) -> RunOutput {
    let grid = &cfg.grid;
    let gop = grid.gop_duration_s;
    let policy = cfg.cache.policy;
    let cost = cfg.cost_model();
    let traces = w.context.traces();
    let ids: Vec<u32> = traces.iter().map(|t| t.viewer_id).collect();

    let mut cache = Cache::new(policy, cfg.capacity_bytes(), grid, cost.clone(), cfg.d_max_steps())
        .with_noc_step(cfg.cache.noc_step);
    if policy.lf_star() {
        cache = cache.with_marked(w.longest_latency(cfg.cache.lf_star_fraction));
    }
    let mut book = ScoreBook::new(cfg.penalty_horizon_s(), Penalty::Linear, cfg.prediction.impulse_weight);
    let mut ledger = CostLedger::new(cost);
    let mut log = Vec::new();
    let mut interest = Vec::new();
    let base = cfg.cache.base_layer;
    let count_base = cfg.cache.base_layer_in_metrics;

    for (t, row) in w.schedule.iter().enumerate() {
        let t = t as u32;
        if policy.uses_scores() {
            for vs in row {
                let v = vs.viewer;
                let level = w.device_levels[v];
                let lag = w.lag[v];
                let id = ids[v];
                let forecasts = vs.forecasts.iter().flat_map(|f| {
                    let tau_s = f64::from(f.segment + lag) * gop;
                    let base_fc = base.then(|| RequestForecast {
                        viewer_id: id,
                        tile: TileKey::base_layer(f.segment),
                        level: 0,
                        tau_s,
                        will_request: true,
                        interest: 1.0,
                    });
                    tiles_of(f.mask)
                        .map(move |i| RequestForecast {
                            viewer_id: id,
                            tile: TileKey::new(f.segment, i),
                            level,
                            tau_s,
                            will_request: true,
                            interest: f.interest.as_ref().map_or(1.0, |x| f64::from(x[usize::from(i)])),
                        })
                        .chain(base_fc)
                });
                book.replace(id, forecasts);
            }
            book.refresh(f64::from(t) * gop);
        }
        cache.begin_step(t, &book);

        for vs in row {
            let Some(segment) = vs.download else { continue };
            let v = vs.viewer;
            let level = w.device_levels[v];
            let requested = vs.forecasts.first().filter(|f| f.segment == segment).map_or(0, |f| f.mask);
            let mut serve = |tile: TileKey, level: u8, counted: bool| {
                book.consume(ids[v], tile);
                let res = cache.access(&Request { t, viewer: v, tile, level }, &book);
                if counted {
                    ledger.record(t, &res);
                }
                let (row, col) = if tile.is_base_layer() {
                    (-1, -1)
                } else {
                    let (r, c) = grid.row_col(tile.index);
                    (i32::from(r), i32::from(c))
                };
                log.push(AccessRecord::from_result(t, ids[v], segment, row, col, level, &res));
            };
            if base {
                serve(TileKey::base_layer(segment), 0, count_base);
            }
            for i in tiles_of(requested) {
                serve(TileKey::new(segment, i), level, true);
            }
            let w_level = grid.tile_bytes(level);
            interest.push(InterestRecord {
                t,
                viewer: ids[v],
                segment,
                actual_bytes: u64::from(vs.truth_mask.count_ones()) * w_level,
                covered_bytes: u64::from((vs.truth_mask & requested).count_ones()) * w_level,
            });
        }
    }

    let report = summarize(cfg, w.predictor, &log, &interest);
    RunOutput {
        report,
        ledger,
        log,
        interest,
    }
}
