//! Parameter sweeps over capacity or transcoding cost.
//!
//! Every point of a sweep shares the seed's workload, so policies and axis
//! values see identical requests and forecasts.

use serde::{Deserialize, Serialize};

use crate::cache::PolicyKind;
use crate::error::{Error, Result};
use crate::par;

use super::config::SimulationConfig;
use super::engine::{replay, RunOutput};
use super::workload::Workload;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// `cache.capacity_frac`.
    Capacity,
    /// `cost.td_scale`.
    TdScale,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "capacity" | "capacity_frac" => Ok(Self::Capacity),
            "td" | "td_scale" | "td-scale" => Ok(Self::TdScale),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    /// Keep per-run access and interest logs in the output.
    pub keep_logs: bool,
}

/// One sweep point with its full configuration.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub config: SimulationConfig,
    pub output: RunOutput,
}

impl SweepSpec {
    /// Configurations in run order: seed, then axis value, then policy.
    pub fn configs(&self, template: &SimulationConfig) -> Vec<SimulationConfig> {
        let mut out = Vec::new();
        for &seed in &self.seeds {
            for &value in &self.values {
                for &policy in &self.policies {
                    let mut cfg = template.clone();
                    cfg.seed = seed;
                    cfg.cache.policy = policy;
                    match self.axis {
                        SweepAxis::Capacity => cfg.cache.capacity_frac = value,
                        SweepAxis::TdScale => cfg.cost.td_scale = value,
                    }
                    out.push(cfg);
                }
            }
        }
        out
    }
}

pub fn sweep(template: &SimulationConfig, spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    let configs = spec.configs(template);
    for c in &configs {
        c.validate()?;
    }
    let per_seed = spec.values.len() * spec.policies.len();
    let mut out = Vec::with_capacity(configs.len());
    for chunk in configs.chunks(per_seed.max(1)) {
        let Some(first) = chunk.first() else { continue };
        let workload = Workload::from_config(first)?;
        let points = par::map(template.run.exec, chunk, |cfg| {
            let mut output = replay(&workload, cfg);
            if !spec.keep_logs {
                output.log = Vec::new();
                output.interest = Vec::new();
            }
            SweepPoint {
                config: cfg.clone(),
                output,
            }
        });
        out.extend(points);
    }
    Ok(out)
}
