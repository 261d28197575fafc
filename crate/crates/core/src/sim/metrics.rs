//! Run metrics and the raw logs they are computed from.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cache::{AccessResult, Outcome, PolicyKind};
use crate::transgain::CostModel;
use crate::error::Result;
use crate::fovcast::PredictorKind;

use super::config::SimulationConfig;

/// Number of latency groups in the per-group hit ratios.
pub const LATENCY_GROUPS: usize = 8;

/// One row of the access log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub t: u32,
    pub viewer: u32,
    pub segment: u32,
    /// `-1` for the base layer.
    pub row: i32,
    pub col: i32,
    pub level: u8,
    pub outcome: Outcome,
    pub bytes_origin: u64,
    pub bytes_served: u64,
    pub transcode_level: Option<u8>,
}

impl AccessRecord {
    pub fn is_hit(&self) -> bool {
        self.outcome != Outcome::Miss
    }

    /// Download lag in steps, recoverable from the log alone.
    pub fn lag(&self) -> u32 {
        self.t - self.segment
    }

    pub fn from_result(t: u32, viewer: u32, segment: u32, row: i32, col: i32, level: u8, r: &AccessResult) -> Self {
        Self {
            t,
            viewer,
            segment,
            row,
            col,
            level,
            outcome: r.outcome,
            bytes_origin: r.bytes_origin,
            bytes_served: r.bytes_served,
            transcode_level: r.transcode_level,
        }
    }
}

/// Actual-FoV bytes of one download and how many of them were fetched.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterestRecord {
    pub t: u32,
    pub viewer: u32,
    pub segment: u32,
    pub actual_bytes: u64,
    pub covered_bytes: u64,
}

/// Metrics over one time window of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub backhaul_reduction: f64,
    pub hit_byte_ratio: f64,
    pub cost_per_user_usd: f64,
    pub transcode_bytes: u64,
    pub interest_hit_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: PolicyKind,
    pub predictor: PredictorKind,
    pub capacity_frac: f64,
    pub td_scale: f64,
    pub seed: u64,
    pub viewers: usize,
    pub all: WindowMetrics,
    /// Excluding the warm-up span.
    pub warm: WindowMetrics,
    pub group_hit_ratios: Vec<f64>,
}

/// The flat CSV form of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: PolicyKind,
    pub predictor: PredictorKind,
    pub capacity_frac: f64,
    pub td_scale: f64,
    pub seed: u64,
    pub backhaul_reduction: f64,
    pub cost_per_user_usd: f64,
    pub transcode_bytes: u64,
    pub interest_hit_ratio: f64,
}

pub const METRICS_CSV_HEADER: [&str; 9] = [
    "policy",
    "predictor",
    "capacity_frac",
    "td_scale",
    "seed",
    "backhaul_reduction",
    "cost_per_user_usd",
    "transcode_bytes",
    "interest_hit_ratio",
];

impl MetricsReport {
    pub fn row(&self, warm: bool) -> MetricsRow {
        let w = if warm { &self.warm } else { &self.all };
        MetricsRow {
            policy: self.policy,
            predictor: self.predictor,
            capacity_frac: self.capacity_frac,
            td_scale: self.td_scale,
            seed: self.seed,
            backhaul_reduction: w.backhaul_reduction,
            cost_per_user_usd: w.cost_per_user_usd,
            transcode_bytes: w.transcode_bytes,
            interest_hit_ratio: w.interest_hit_ratio,
        }
    }
}

/// `1 - origin / requested`; zero when nothing was requested.
pub fn backhaul_reduction(origin_bytes: u64, requested_bytes: u64) -> f64 {
    if requested_bytes == 0 {
        return 0.0;
    }
    1.0 - origin_bytes as f64 / requested_bytes as f64
}

/// Hit-byte ratio per latency group. Viewers are ranked by `rank_key`
/// (ascending, ties by id) and split into `n_groups` groups of equal size,
/// the first group holding the shortest latencies.
pub fn group_hit_ratios(log: &[AccessRecord], rank_key: &BTreeMap<u32, f64>, n_groups: usize) -> Vec<f64> {
    let mut viewers: Vec<(u32, f64)> = rank_key.iter().map(|(v, k)| (*v, *k)).collect();
    viewers.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let n = viewers.len();
    let groups = n_groups.clamp(1, n.max(1));
    let group_of: BTreeMap<u32, usize> = viewers
        .iter()
        .enumerate()
        .map(|(rank, (v, _))| (*v, rank * groups / n.max(1)))
        .collect();
    let mut hit = vec![0u64; groups];
    let mut req = vec![0u64; groups];
    for r in log {
        if let Some(&g) = group_of.get(&r.viewer) {
            req[g] += r.bytes_served;
            if r.is_hit() {
                hit[g] += r.bytes_served;
            }
        }
    }
    hit.iter()
        .zip(&req)
        .map(|(h, q)| if *q == 0 { 0.0 } else { *h as f64 / *q as f64 })
        .collect()
}

/// Download lag per viewer as seen in the log.
pub fn lags_from_log(log: &[AccessRecord]) -> BTreeMap<u32, f64> {
    let mut out = BTreeMap::new();
    for r in log {
        out.entry(r.viewer).or_insert(f64::from(r.lag()));
    }
    out
}

/// Overall covered share of actual-FoV bytes, and the per-step series.
pub fn interest_hit_ratio(records: &[InterestRecord]) -> (f64, Vec<(u32, f64)>) {
    let mut by_t: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    let (mut a, mut c) = (0u64, 0u64);
    for r in records {
        let e = by_t.entry(r.t).or_default();
        e.0 += r.actual_bytes;
        e.1 += r.covered_bytes;
        a += r.actual_bytes;
        c += r.covered_bytes;
    }
    let ratio = |a: u64, c: u64| if a == 0 { 0.0 } else { c as f64 / a as f64 };
    let series = by_t.into_iter().map(|(t, (a, c))| (t, ratio(a, c))).collect();
    (ratio(a, c), series)
}

fn window(cost: &CostModel, log: &[AccessRecord], interest: &[InterestRecord], from: u32, viewers: usize) -> WindowMetrics {
    let (mut requested, mut hit, mut origin, mut transcoded) = (0u64, 0u64, 0u64, 0u64);
    let mut dollars = 0.0;
    for r in log.iter().filter(|r| r.t >= from) {
        requested += r.bytes_served;
        origin += r.bytes_origin;
        if r.is_hit() {
            hit += r.bytes_served;
        }
        dollars += cost.download_usd(r.bytes_origin as f64);
        if let Some(k) = r.transcode_level {
            transcoded += r.bytes_served;
            dollars += cost.transcode_usd(k);
        }
    }
    let records: Vec<InterestRecord> = interest.iter().filter(|r| r.t >= from).copied().collect();
    WindowMetrics {
        backhaul_reduction: backhaul_reduction(origin, requested),
        hit_byte_ratio: if requested == 0 { 0.0 } else { hit as f64 / requested as f64 },
        cost_per_user_usd: dollars / viewers.max(1) as f64,
        transcode_bytes: transcoded,
        interest_hit_ratio: interest_hit_ratio(&records).0,
    }
}

/// Computes a run's report from its config and raw logs alone.
///
/// Base-layer rows are left out when the config excludes them from the
/// metrics. Latency groups rank viewers by download lag in steps.
pub fn summarize(
    cfg: &SimulationConfig,
    predictor: PredictorKind,
    log: &[AccessRecord],
    interest: &[InterestRecord],
) -> MetricsReport {
    let counted: Vec<AccessRecord> = log
        .iter()
        .filter(|r| cfg.cache.base_layer_in_metrics || r.row >= 0)
        .copied()
        .collect();
    let mut ids: Vec<u32> = interest.iter().map(|r| r.viewer).chain(log.iter().map(|r| r.viewer)).collect();
    ids.sort_unstable();
    ids.dedup();
    let viewers = ids.len();
    let cost = cfg.cost_model();
    let warm_from = (cfg.run.warmup_s / cfg.grid.gop_duration_s).round() as u32;
    MetricsReport {
        policy: cfg.cache.policy,
        predictor,
        capacity_frac: cfg.cache.capacity_frac,
        td_scale: cfg.cost.td_scale,
        seed: cfg.seed,
        viewers,
        all: window(&cost, &counted, interest, 0, viewers),
        warm: window(&cost, &counted, interest, warm_from, viewers),
        group_hit_ratios: group_hit_ratios(&counted, &lags_from_log(log), LATENCY_GROUPS),
    }
}

pub fn write_access_log<W: Write>(out: W, log: &[AccessRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if log.is_empty() {
        w.write_record([
            "t",
            "viewer",
            "segment",
            "row",
            "col",
            "level",
            "outcome",
            "bytes_origin",
            "bytes_served",
            "transcode_level",
        ])?;
    }
    for r in log {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_access_log<R: Read>(input: R) -> Result<Vec<AccessRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_interest_log<W: Write>(out: W, records: &[InterestRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(["t", "viewer", "segment", "actual_bytes", "covered_bytes"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_interest_log<R: Read>(input: R) -> Result<Vec<InterestRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_metrics_csv<W: Write>(out: W, reports: &[MetricsReport], warm: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if reports.is_empty() {
        w.write_record(METRICS_CSV_HEADER)?;
    }
    for r in reports {
        w.serialize(r.row(warm))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
