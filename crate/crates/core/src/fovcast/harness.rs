//! Prediction-accuracy harness: overlap ratio and L2 loss per horizon.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::par::{self, ExecMode};
use crate::trace::InterestMap;

use super::context::CohortContext;
use super::PredictorKind;

/// Share of the actual FoV's tile mass that falls on predicted tiles.
/// `None` when the actual map is empty.
pub fn overlap_ratio(predicted: &InterestMap, actual: &InterestMap) -> Option<f64> {
    let total = actual.total();
    if total <= 0.0 {
        return None;
    }
    let covered: f64 = actual
        .values
        .iter()
        .zip(&predicted.values)
        .filter(|(_, p)| **p > 0.0)
        .map(|(a, _)| a)
        .sum();
    Some(covered / total)
}

fn normalized(m: &InterestMap) -> Vec<f64> {
    let total = m.total();
    if total <= 0.0 {
        return vec![0.0; m.values.len()];
    }
    m.values.iter().map(|v| v / total).collect()
}

/// Euclidean distance between the two maps normalised to distributions.
pub fn l2_loss(predicted: &InterestMap, actual: &InterestMap) -> f64 {
    normalized(predicted)
        .iter()
        .zip(normalized(actual))
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub predictor: PredictorKind,
    pub horizon_s: f64,
    pub overlap_ratio: f64,
    pub l2_loss: f64,
    #[serde(skip)]
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct HarnessParams {
    /// Whole seconds between the last played frame's segment and the target.
    pub horizons_s: Vec<u32>,
    /// Evaluate every `stride`-th target segment.
    pub stride: u32,
    pub exec: ExecMode,
}

impl Default for HarnessParams {
    fn default() -> Self {
        Self {
            horizons_s: (3..=10).collect(),
            stride: 1,
            exec: ExecMode::default(),
        }
    }
}

/// Mean accuracy of `kind` at each horizon over all viewers and segments.
///
/// A viewer predicting segment `p` at horizon `h` has played up to segment
/// `p - h`; its front viewers are those whose latency is at least `h` steps
/// shorter.
pub fn evaluate_predictors(ctx: &CohortContext, kind: PredictorKind, params: &HarnessParams) -> Vec<AccuracyRow> {
    let n = ctx.viewers();
    let latency: Vec<u32> = (0..n).map(|v| ctx.latency_steps(v)).collect();
    let stride = params.stride.max(1) as usize;
    params
        .horizons_s
        .iter()
        .map(|&h| {
            let per_viewer = par::map_range(params.exec, n, |v| {
                let front: Vec<usize> = (0..n)
                    .filter(|&j| j != v && latency[j] + h <= latency[v])
                    .collect();
                let mut acc = (0.0, 0.0, 0usize);
                for p in (h..ctx.segments()).step_by(stride) {
                    let actual = ctx.truth(v, p);
                    let pred = ctx.predict(kind, v, p, Some(p - h), &front);
                    if let Some(r) = overlap_ratio(&pred, actual) {
                        acc.0 += r;
                        acc.1 += l2_loss(&pred, actual);
                        acc.2 += 1;
                    }
                }
                acc
            });
            let (mut o, mut l, mut c) = (0.0, 0.0, 0usize);
            for (a, b, k) in per_viewer {
                o += a;
                l += b;
                c += k;
            }
            let c_f = c.max(1) as f64;
            AccuracyRow {
                predictor: kind,
                horizon_s: f64::from(h),
                overlap_ratio: o / c_f,
                l2_loss: l / c_f,
                samples: c,
            }
        })
        .collect()
}

pub fn write_accuracy_csv(path: &Path, rows: &[AccuracyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["predictor", "horizon_s", "overlap_ratio", "l2_loss"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fovcast::{CohortContext, ContextParams};
    use crate::trace::{synthesize_cohort, CohortParams, TileGridSpec};

    fn ctx() -> CohortContext {
        let grid = TileGridSpec::default();
        let params = CohortParams {
            n_viewers: 8,
            duration_s: 16.0,
            correlation: 0.9,
            seed: 11,
            ..CohortParams::default()
        };
        CohortContext::build(synthesize_cohort(&params, &grid), &grid, &ContextParams::default()).unwrap()
    }

    #[test]
    fn metric_definitions() {
        let mut a = InterestMap::zeros(0, 4);
        a.values = vec![0.5, 0.5, 0.0, 0.0];
        let mut p = InterestMap::zeros(0, 4);
        p.values = vec![0.2, 0.0, 0.0, 0.2];
        assert_eq!(overlap_ratio(&p, &a), Some(0.5));
        // normalised: a = (.5,.5,0,0), p = (.5,0,0,.5)
        assert!((l2_loss(&p, &a) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(l2_loss(&a, &a), 0.0);
        assert_eq!(overlap_ratio(&p, &InterestMap::zeros(0, 4)), None);
    }

    #[test]
    fn truth_passthrough_is_perfect() {
        let c = ctx();
        let params = HarnessParams {
            horizons_s: vec![3, 5, 10],
            ..HarnessParams::default()
        };
        for row in evaluate_predictors(&c, PredictorKind::Truth, &params) {
            assert_eq!(row.overlap_ratio, 1.0);
            assert_eq!(row.l2_loss, 0.0);
            assert!(row.samples > 0);
        }
    }

    #[test]
    fn antipodal_predictor_misses() {
        let c = ctx();
        let params = HarnessParams {
            horizons_s: vec![4],
            ..HarnessParams::default()
        };
        let row = &evaluate_predictors(&c, PredictorKind::Antipodal, &params)[0];
        assert!(row.overlap_ratio < 0.02, "{}", row.overlap_ratio);
    }

    #[test]
    fn csv_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("acc.csv");
        let row = AccuracyRow {
            predictor: PredictorKind::ColPLong,
            horizon_s: 5.0,
            overlap_ratio: 0.75,
            l2_loss: 0.25,
            samples: 3,
        };
        write_accuracy_csv(&path, &[row]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "predictor,horizon_s,overlap_ratio,l2_loss\ncolp-long,5.0,0.75,0.25\n");
    }
}
