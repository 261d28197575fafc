//! Byte and dollar accounting for one run.

use serde::Serialize;

use crate::cache::{AccessResult, Outcome};
use crate::trace::MAX_LEVELS;
use crate::transgain::CostModel;

/// Totals accumulated over one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepTotals {
    pub t: u32,
    pub requested_bytes: u64,
    pub hit_bytes: u64,
    pub origin_bytes: u64,
    pub transcode_bytes: u64,
    pub transcodes: u64,
    pub download_usd: f64,
    pub transcode_usd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostLedger {
    cost: CostModel,
    pub requested_bytes: u64,
    pub hit_bytes: u64,
    pub served_bytes: u64,
    pub origin_bytes: u64,
    /// Bytes produced by transcoding.
    pub transcode_bytes: u64,
    pub transcodes: [u64; MAX_LEVELS],
    pub download_usd: f64,
    pub transcode_usd: f64,
    pub series: Vec<StepTotals>,
}

impl CostLedger {
    pub fn new(cost: CostModel) -> Self {
        Self {
            cost,
            requested_bytes: 0,
            hit_bytes: 0,
            served_bytes: 0,
            origin_bytes: 0,
            transcode_bytes: 0,
            transcodes: [0; MAX_LEVELS],
            download_usd: 0.0,
            transcode_usd: 0.0,
            series: Vec::new(),
        }
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    fn bucket(&mut self, t: u32) -> &mut StepTotals {
        if self.series.last().is_none_or(|s| s.t != t) {
            self.series.push(StepTotals {
                t,
                ..StepTotals::default()
            });
        }
        self.series.last_mut().expect("just pushed")
    }

    pub fn record(&mut self, t: u32, res: &AccessResult) {
        let download = self.cost.download_usd(res.bytes_origin as f64);
        let transcode = res.transcode_level.map_or(0.0, |k| self.cost.transcode_usd(k));
        let hit = if res.outcome == Outcome::Miss { 0 } else { res.bytes_requested };
        let produced = if res.transcode_level.is_some() { res.bytes_served } else { 0 };

        self.requested_bytes += res.bytes_requested;
        self.served_bytes += res.bytes_served;
        self.hit_bytes += hit;
        self.origin_bytes += res.bytes_origin;
        self.transcode_bytes += produced;
        if let Some(k) = res.transcode_level {
            self.transcodes[usize::from(k)] += 1;
        }
        self.download_usd += download;
        self.transcode_usd += transcode;

        let b = self.bucket(t);
        b.requested_bytes += res.bytes_requested;
        b.hit_bytes += hit;
        b.origin_bytes += res.bytes_origin;
        b.transcode_bytes += produced;
        b.transcodes += u64::from(res.transcode_level.is_some());
        b.download_usd += download;
        b.transcode_usd += transcode;
    }

    pub fn total_usd(&self) -> f64 {
        self.download_usd + self.transcode_usd
    }

    pub fn total_transcodes(&self) -> u64 {
        self.transcodes.iter().sum()
    }

    /// Totals over steps `t >= from`.
    pub fn window(&self, from: u32) -> StepTotals {
        let mut acc = StepTotals {
            t: from,
            ..StepTotals::default()
        };
        for s in self.series.iter().filter(|s| s.t >= from) {
            acc.requested_bytes += s.requested_bytes;
            acc.hit_bytes += s.hit_bytes;
            acc.origin_bytes += s.origin_bytes;
            acc.transcode_bytes += s.transcode_bytes;
            acc.transcodes += s.transcodes;
            acc.download_usd += s.download_usd;
            acc.transcode_usd += s.transcode_usd;
        }
        acc
    }
}
