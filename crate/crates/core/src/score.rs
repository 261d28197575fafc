//! Predictive caching scores.
//!
//! Each forecast puts a unit impulse at the time a viewer is predicted to
//! request a tile. A tile's score at time `t` is the sum, over impulses that
//! fall in `[t, t + T]`, of a penalty that decays linearly with the distance to
//! `t`. Splitting that sum by the requesting viewer's device level gives the
//! per-level popularity used by the transcoding-aware gain.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::trace::{TileGridSpec, TileKey, MAX_LEVELS};

/// Predicted request of one tile by one viewer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestForecast {
    pub viewer_id: u32,
    pub tile: TileKey,
    /// Level the viewer will ask for (its device level).
    pub level: u8,
    /// Wall-clock time of the predicted request, seconds.
    pub tau_s: f64,
    pub will_request: bool,
    /// Predicted interest in the tile, used only by [`ImpulseWeight::Interest`].
    pub interest: f64,
}

/// How much a single forecast contributes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpulseWeight {
    /// One per predicted request.
    #[default]
    Binary,
    /// The predicted interest fraction.
    Interest,
}

/// A weighted impulse at `tau_s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Impulse {
    pub tau_s: f64,
    pub level: u8,
    pub weight: f64,
}

impl Impulse {
    /// Value of the impulse sampled at `t`; nonzero only at `t == tau`.
    pub fn value_at(&self, t: f64) -> f64 {
        if t == self.tau_s {
            self.weight
        } else {
            0.0
        }
    }
}

/// The impulse a forecast places, or `None` when no request is predicted.
pub fn per_user_score(forecast: &RequestForecast, weighting: ImpulseWeight) -> Option<Impulse> {
    if !forecast.will_request {
        return None;
    }
    let weight = match weighting {
        ImpulseWeight::Binary => 1.0,
        ImpulseWeight::Interest => forecast.interest.clamp(0.0, 1.0),
    };
    Some(Impulse {
        tau_s: forecast.tau_s,
        level: forecast.level,
        weight,
    })
}

/// Impulses for `tile` from viewers that have not yet fetched it (`tau >= t`).
/// Duplicates are kept.
pub fn aggregate(tile: TileKey, forecasts: &[RequestForecast], t: f64, weighting: ImpulseWeight) -> Vec<Impulse> {
    forecasts
        .iter()
        .filter(|f| f.tile == tile && f.tau_s >= t)
        .filter_map(|f| per_user_score(f, weighting))
        .collect()
}

/// Time-decaying penalty applied to an impulse `offset = tau - t` seconds out.
#[derive(Clone, Copy, Debug, Default)]
pub enum Penalty {
    /// `T - offset`.
    #[default]
    Linear,
    /// Any other decay; must return 0 outside `[0, T]`.
    Custom(fn(offset: f64, horizon: f64) -> f64),
}

impl Penalty {
    pub fn weight(&self, offset: f64, horizon: f64) -> f64 {
        if !(0.0..=horizon).contains(&offset) {
            return 0.0;
        }
        match self {
            Penalty::Linear => horizon - offset,
            Penalty::Custom(f) => f(offset, horizon),
        }
    }
}

/// `S_f` at `t` with penalty horizon `horizon`.
pub fn final_score(impulses: &[Impulse], t: f64, horizon: f64, penalty: Penalty) -> f64 {
    impulses
        .iter()
        .map(|i| i.weight * penalty.weight(i.tau_s - t, horizon))
        .sum()
}

/// `S_f` split by requested level.
pub fn popularity_by_level(impulses: &[Impulse], t: f64, horizon: f64, penalty: Penalty) -> [f64; MAX_LEVELS] {
    let mut p = [0.0; MAX_LEVELS];
    for i in impulses {
        p[usize::from(i.level)] += i.weight * penalty.weight(i.tau_s - t, horizon);
    }
    p
}

/// Read access to per-level popularity, as consumed by the cache policies.
pub trait ScoreView {
    fn popularity(&self, tile: &TileKey) -> [f64; MAX_LEVELS];
}

impl ScoreView for HashMap<TileKey, [f64; MAX_LEVELS]> {
    fn popularity(&self, tile: &TileKey) -> [f64; MAX_LEVELS] {
        self.get(tile).copied().unwrap_or([0.0; MAX_LEVELS])
    }
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    tile: TileKey,
    impulse: Impulse,
}

/// Live scores for one simulation run.
///
/// Every viewer owns one forecast set, replaced wholesale on each refresh, so
/// an impulse is never counted twice. [`ScoreBook::refresh`] recomputes all
/// popularities at the new time; [`ScoreBook::consume`] removes a viewer's
/// impulse once the request it predicted has happened.
#[derive(Clone, Debug)]
pub struct ScoreBook {
    horizon: f64,
    penalty: Penalty,
    weighting: ImpulseWeight,
    t: f64,
    forecasts: BTreeMap<u32, Vec<Pending>>,
    scores: HashMap<TileKey, [f64; MAX_LEVELS]>,
}

impl ScoreBook {
    pub fn new(horizon: f64, penalty: Penalty, weighting: ImpulseWeight) -> Self {
        Self {
            horizon,
            penalty,
            weighting,
            t: 0.0,
            forecasts: BTreeMap::new(),
            scores: HashMap::new(),
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Replaces all of `viewer`'s forecasts and updates the scores in place.
    pub fn replace(&mut self, viewer: u32, forecasts: impl IntoIterator<Item = RequestForecast>) {
        if let Some(old) = self.forecasts.remove(&viewer) {
            for p in &old {
                self.add(p, -1.0);
            }
        }
        let fresh: Vec<Pending> = forecasts
            .into_iter()
            .filter_map(|f| {
                per_user_score(&f, self.weighting).map(|impulse| Pending {
                    tile: f.tile,
                    impulse,
                })
            })
            .collect();
        for p in &fresh {
            self.add(p, 1.0);
        }
        self.forecasts.insert(viewer, fresh);
    }

    fn add(&mut self, p: &Pending, sign: f64) {
        let v = p.impulse.weight * self.penalty.weight(p.impulse.tau_s - self.t, self.horizon);
        if v == 0.0 {
            return;
        }
        let slot = self.scores.entry(p.tile).or_insert([0.0; MAX_LEVELS]);
        slot[usize::from(p.impulse.level)] += sign * v;
    }

    /// Moves to time `t` and recomputes every score from the live forecasts.
    pub fn refresh(&mut self, t: f64) {
        self.t = t;
        self.scores.clear();
        let all: Vec<Pending> = self.forecasts.values().flatten().copied().collect();
        for p in &all {
            self.add(p, 1.0);
        }
    }

    /// Drops `viewer`'s impulses on `tile`. Returns how many were removed.
    pub fn consume(&mut self, viewer: u32, tile: TileKey) -> usize {
        let Some(list) = self.forecasts.get_mut(&viewer) else {
            return 0;
        };
        let mut removed = Vec::new();
        list.retain(|p| {
            if p.tile == tile {
                removed.push(*p);
                false
            } else {
                true
            }
        });
        for p in &removed {
            self.add(p, -1.0);
        }
        if let Some(slot) = self.scores.get_mut(&tile) {
            for v in slot.iter_mut() {
                // cancellation can leave dust below zero
                if *v < 1e-9 {
                    *v = v.max(0.0);
                }
            }
        }
        removed.len()
    }

    /// Number of live impulses `viewer` has on `tile`.
    pub fn impulse_count(&self, viewer: u32, tile: TileKey) -> usize {
        self.forecasts
            .get(&viewer)
            .map_or(0, |l| l.iter().filter(|p| p.tile == tile).count())
    }

    pub fn final_score(&self, tile: &TileKey) -> f64 {
        self.popularity(tile).iter().sum()
    }

    /// Tiles with a nonzero score, in key order.
    pub fn scored_tiles(&self) -> Vec<TileKey> {
        let mut keys: Vec<TileKey> = self
            .scores
            .iter()
            .filter(|(_, v)| v.iter().any(|x| *x > 0.0))
            .map(|(k, _)| *k)
            .collect();
        keys.sort();
        keys
    }

    /// Debug dump with columns `t,segment,row,col,level,S_f`.
    pub fn write_csv<W: Write>(&self, out: W, grid: &TileGridSpec, with_header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if with_header {
            w.write_record(["t", "segment", "row", "col", "level", "S_f"])?;
        }
        for tile in self.scored_tiles() {
            let (row, col) = if tile.is_base_layer() {
                (-1i64, -1i64)
            } else {
                let (r, c) = grid.row_col(tile.index);
                (i64::from(r), i64::from(c))
            };
            for (level, v) in self.popularity(&tile).iter().enumerate() {
                if *v > 0.0 {
                    w.write_record([
                        self.t.to_string(),
                        tile.segment.to_string(),
                        row.to_string(),
                        col.to_string(),
                        level.to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl ScoreView for ScoreBook {
    fn popularity(&self, tile: &TileKey) -> [f64; MAX_LEVELS] {
        self.scores.popularity(tile)
    }
}
