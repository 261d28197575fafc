//! Run configuration, stored as sectioned TOML with every default filled in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cache::PolicyKind;
use crate::error::{Error, Result};
use crate::fovcast::PredictorKind;
use crate::par::ExecMode;
use crate::score::ImpulseWeight;
use crate::trace::{FovShape, TileGridSpec};
use crate::transgain::{CostModel, TranscodePricing};

/// How viewers get their requested quality level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceLevels {
    /// Viewer at cohort position `i` gets level `i mod levels`.
    #[default]
    RoundRobin,
    /// Use the level stored with each trace.
    FromCohort,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    /// Trace CSV to replay; a synthetic cohort is generated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
    pub n_viewers: u32,
    pub duration_s: f64,
    pub correlation: f64,
    pub buffer_s: f64,
    pub device_levels: DeviceLevels,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            trace_path: None,
            n_viewers: 48,
            duration_s: 120.0,
            correlation: 0.9,
            buffer_s: 2.0,
            device_levels: DeviceLevels::RoundRobin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FovConfig {
    pub width_deg: f64,
    pub height_deg: f64,
    pub samples_per_axis: usize,
}

impl Default for FovConfig {
    fn default() -> Self {
        Self {
            width_deg: 90.0,
            height_deg: 90.0,
            samples_per_axis: crate::trace::DEFAULT_SAMPLES_PER_AXIS,
        }
    }
}

impl FovConfig {
    pub fn shape(&self) -> FovShape {
        FovShape {
            width_deg: self.width_deg,
            height_deg: self.height_deg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionConfig {
    pub predictor: PredictorKind,
    pub dtw_stride: usize,
    pub impulse_weight: ImpulseWeight,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            predictor: PredictorKind::ColPLong,
            dtw_stride: 3,
            impulse_weight: ImpulseWeight::Binary,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub policy: PolicyKind,
    /// Capacity as a fraction of `d_max * tiles * top-level tile size`;
    /// `inf` means unbounded.
    pub capacity_frac: f64,
    pub noc_step: f64,
    /// Every viewer also fetches one full-panorama base layer per GoP.
    pub base_layer: bool,
    /// Count base-layer traffic in the metrics when it is enabled.
    pub base_layer_in_metrics: bool,
    /// Share of viewers with the longest latency excluded from insertion by LF*.
    pub lf_star_fraction: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Coffee,
            capacity_frac: 0.4,
            noc_step: crate::cache::NOC_STEP,
            base_layer: false,
            base_layer_in_metrics: true,
            lf_star_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub pricing: TranscodePricing,
    pub td_scale: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            pricing: TranscodePricing::Aws,
            td_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Longest download lag; also the tile lifetime in the cache.
    pub d_max_s: f64,
    /// Penalty horizon is this plus the buffer length.
    pub penalty_base_s: f64,
    /// Leading span excluded from the warm metrics.
    pub warmup_s: f64,
    pub exec: ExecMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d_max_s: 20.0,
            penalty_base_s: 15.0,
            warmup_s: 20.0,
            exec: ExecMode::Parallel,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub grid: TileGridSpec,
    pub cohort: CohortConfig,
    pub fov: FovConfig,
    pub prediction: PredictionConfig,
    pub cache: CacheConfig,
    pub cost: CostConfig,
    pub run: RunConfig,
}


fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(config_err)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Applies `section.key=value` overrides. Values are read as TOML
    /// literals, falling back to plain strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc: toml::Table = toml::from_str(&self.to_toml()?).map_err(config_err)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            set_path(&mut doc, key.trim(), parse_value(raw.trim()))?;
        }
        let cfg: Self = toml::Value::Table(doc).try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.cohort.n_viewers == 0 {
            return bad("cohort.n_viewers must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.cohort.correlation) {
            return bad(format!("cohort.correlation {} outside [0, 1]", self.cohort.correlation));
        }
        if !(self.cohort.duration_s > 0.0) || !(self.cohort.buffer_s > 0.0) {
            return bad("cohort.duration_s and cohort.buffer_s must be positive".into());
        }
        if !(self.grid.gop_duration_s > 0.0) {
            return bad("grid.gop_duration_s must be positive".into());
        }
        if !(self.run.d_max_s > 0.0) || self.run.penalty_base_s < 0.0 || self.run.warmup_s < 0.0 {
            return bad("run.d_max_s must be positive, penalty and warm-up non-negative".into());
        }
        if !(self.cache.capacity_frac >= 0.0) {
            return bad(format!("cache.capacity_frac {} must be non-negative", self.cache.capacity_frac));
        }
        if !(0.0..=1.0).contains(&self.cache.lf_star_fraction) || !(self.cache.noc_step >= 0.0) {
            return bad("cache.lf_star_fraction must be in [0, 1], cache.noc_step non-negative".into());
        }
        if !(self.cost.td_scale >= 0.0) {
            return bad(format!("cost.td_scale {} must be non-negative", self.cost.td_scale));
        }
        if !(self.fov.width_deg > 0.0 && self.fov.width_deg < 180.0 && self.fov.height_deg > 0.0 && self.fov.height_deg < 180.0) {
            return bad("fov extents must lie in (0, 180) degrees".into());
        }
        if self.fov.samples_per_axis == 0 {
            return bad("fov.samples_per_axis must be positive".into());
        }
        Ok(())
    }

    /// `F = d_max * tiles * w(top)`: bytes of one lifetime of top-level tiles.
    pub fn normalizing_bytes(&self) -> f64 {
        self.d_max_steps() as f64 * self.grid.tiles() as f64 * self.grid.tile_bytes(self.grid.top_level()) as f64
    }

    pub fn capacity_bytes(&self) -> u64 {
        let c = self.cache.capacity_frac * self.normalizing_bytes();
        if c.is_finite() && c < u64::MAX as f64 {
            c.round() as u64
        } else {
            u64::MAX
        }
    }

    pub fn d_max_steps(&self) -> u32 {
        crate::fovcast::to_steps(self.run.d_max_s, self.grid.gop_duration_s)
    }

    /// `T = penalty_base + buffer`, seconds.
    pub fn penalty_horizon_s(&self) -> f64 {
        self.run.penalty_base_s + self.cohort.buffer_s
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel::new(self.cost.pricing, &self.grid, self.cost.td_scale)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty override key `{key}`")))?;
    let mut table = doc;
    for p in parts {
        table = match table.get_mut(p) {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(Error::Config(format!("unknown config section `{p}` in `{key}`"))),
        };
    }
    if !table.contains_key(last) && last != "trace_path" {
        return Err(Error::Config(format!("unknown config key `{key}`")));
    }
    table.insert(last.to_string(), value);
    Ok(())
}
