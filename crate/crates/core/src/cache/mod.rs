//! Edge cache and its update policies.
//!
//! Every policy shares one access procedure: look the tile up, fetch or
//! transcode on a miss, optionally insert, drop segments older than the
//! maximum download lag, then evict the lowest-priority entries until the
//! cache fits. Policies differ in the lookup path, the admission rule and the
//! eviction priority.

mod noc;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use noc::NocWeights;
pub use state::{eviction_order, CacheEntry, CacheState};

use crate::score::ScoreView;
use crate::trace::{TileGridSpec, TileId, TileKey, MAX_LEVELS};
use crate::transgain::{marginal_unit_gain, CostModel};

/// Step size of the online-gradient baseline.
pub const NOC_STEP: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Coffee,
    TransCoffee,
    CachingAll,
    LruLive,
    LruLiveT,
    NocLive,
    NocLiveT,
    LfStar,
    LfStarT,
    ETranscoding,
    #[serde(rename = "ete0c")]
    Ete0c,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 11] = [
        PolicyKind::Coffee,
        PolicyKind::TransCoffee,
        PolicyKind::CachingAll,
        PolicyKind::LruLive,
        PolicyKind::LruLiveT,
        PolicyKind::NocLive,
        PolicyKind::NocLiveT,
        PolicyKind::LfStar,
        PolicyKind::LfStarT,
        PolicyKind::ETranscoding,
        PolicyKind::Ete0c,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Coffee => "coffee",
            PolicyKind::TransCoffee => "trans-coffee",
            PolicyKind::CachingAll => "caching-all",
            PolicyKind::LruLive => "lru-live",
            PolicyKind::LruLiveT => "lru-live-t",
            PolicyKind::NocLive => "noc-live",
            PolicyKind::NocLiveT => "noc-live-t",
            PolicyKind::LfStar => "lf-star",
            PolicyKind::LfStarT => "lf-star-t",
            PolicyKind::ETranscoding => "e-transcoding",
            PolicyKind::Ete0c => "ete0c",
        }
    }

    /// Serves lower levels by transcoding a cached higher one when cheaper.
    pub fn transcodes(self) -> bool {
        matches!(
            self,
            PolicyKind::TransCoffee | PolicyKind::LruLiveT | PolicyKind::NocLiveT | PolicyKind::LfStarT
        )
    }

    fn recency(self) -> bool {
        matches!(
            self,
            PolicyKind::LruLive | PolicyKind::LruLiveT | PolicyKind::LfStar | PolicyKind::LfStarT | PolicyKind::CachingAll
        )
    }

    pub fn noc(self) -> bool {
        matches!(self, PolicyKind::NocLive | PolicyKind::NocLiveT)
    }

    pub fn lf_star(self) -> bool {
        matches!(self, PolicyKind::LfStar | PolicyKind::LfStarT)
    }

    /// Needs live scores from the forecast pipeline.
    pub fn uses_scores(self) -> bool {
        matches!(self, PolicyKind::Coffee | PolicyKind::TransCoffee | PolicyKind::ETranscoding)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            format!("unknown policy `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Hit,
    TranscodeHit,
    Miss,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Hit => "hit",
            Outcome::TranscodeHit => "transcode_hit",
            Outcome::Miss => "miss",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Request {
    pub t: u32,
    /// Position of the viewer in the cohort.
    pub viewer: usize,
    pub tile: TileKey,
    pub level: u8,
}

impl Request {
    pub fn id(&self) -> TileId {
        TileId {
            tile: self.tile,
            level: self.level,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AccessResult {
    pub outcome: Outcome,
    /// Size of the requested tile version.
    pub bytes_requested: u64,
    /// Bytes delivered to the viewer (always the requested size).
    pub bytes_served: u64,
    /// Bytes pulled from the origin for this access.
    pub bytes_origin: u64,
    /// Level produced by transcoding, if any.
    pub transcode_level: Option<u8>,
    /// Whether the access put a new version into the cache.
    pub inserted: bool,
}

impl AccessResult {
    pub fn is_hit(&self) -> bool {
        self.outcome != Outcome::Miss
    }
}

/// One cache instance bound to a policy.
pub struct Cache {
    policy: PolicyKind,
    state: CacheState,
    level_bytes: Vec<u64>,
    level_bytes_f: Vec<f64>,
    base_bytes: u64,
    top: u8,
    cost: CostModel,
    d_max: u32,
    clock: u64,
    noc: Option<NocWeights>,
    marked: Vec<bool>,
}

impl Cache {
    /// `d_max` is the tile lifetime in steps; caching-all ignores `capacity`
    /// and ETE_0C forces it to zero.
    pub fn new(policy: PolicyKind, capacity: u64, grid: &TileGridSpec, cost: CostModel, d_max: u32) -> Self {
        let capacity = match policy {
            PolicyKind::CachingAll => u64::MAX,
            PolicyKind::Ete0c => 0,
            _ => capacity,
        };
        let top = grid.top_level();
        let noc = policy
            .noc()
            .then(|| NocWeights::new(NOC_STEP, capacity, grid.tile_bytes(top)));
        Self {
            policy,
            state: CacheState::new(capacity),
            level_bytes: grid.level_bytes.clone(),
            level_bytes_f: grid.level_bytes.iter().map(|b| *b as f64).collect(),
            base_bytes: grid.tile_bytes(0) * grid.tiles() as u64,
            top,
            cost,
            d_max,
            clock: 0,
            noc,
            marked: Vec::new(),
        }
    }

    /// Viewers (by cohort position) whose fetches must not be inserted.
    pub fn with_marked(mut self, marked: Vec<bool>) -> Self {
        self.marked = marked;
        self
    }

    pub fn with_noc_step(mut self, step: f64) -> Self {
        if self.noc.is_some() {
            let unit = self.level_bytes[usize::from(self.top)];
            self.noc = Some(NocWeights::new(step, self.state.capacity(), unit));
        }
        self
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    pub fn state(&self) -> &CacheState {
        &self.state
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn noc_weights(&self) -> Option<&NocWeights> {
        self.noc.as_ref()
    }

    pub fn size_of(&self, id: &TileId) -> u64 {
        if id.tile.is_base_layer() {
            self.base_bytes
        } else {
            self.level_bytes[usize::from(id.level)]
        }
    }

    fn expire(&mut self, t: u32) {
        let min_segment = t.saturating_sub(self.d_max);
        self.state.expire_before(min_segment);
        if let Some(w) = &mut self.noc {
            w.expire(min_segment);
        }
    }

    /// Start of a step: expire old segments and refresh every priority
    /// against the new scores.
    pub fn begin_step(&mut self, t: u32, scores: &dyn ScoreView) {
        self.expire(t);
        if let Some(w) = &mut self.noc {
            w.rebase();
        }
        if self.policy.uses_scores() {
            let mut tiles: Vec<TileKey> = self.state.entries().map(|e| e.id.tile).collect();
            tiles.dedup();
            for tile in tiles {
                self.reprioritize(tile, scores);
            }
        }
    }

    /// Recomputes the score-based priority of every cached level of `tile`.
    fn reprioritize(&mut self, tile: TileKey, scores: &dyn ScoreView) {
        if !self.policy.uses_scores() {
            return;
        }
        let mask = self.state.levels(tile);
        if mask == 0 {
            return;
        }
        let p = scores.popularity(&tile);
        for level in crate::transgain::levels_of(mask) {
            let priority = self.score_priority(tile, level, mask, &p);
            if let Some(e) = self.state.get_mut(&TileId { tile, level }) {
                e.priority = priority;
            }
        }
    }

    fn score_priority(&self, tile: TileKey, level: u8, mask: u8, p: &[f64; MAX_LEVELS]) -> f64 {
        match self.policy {
            PolicyKind::Coffee => p[usize::from(level)],
            PolicyKind::ETranscoding => p.iter().sum(),
            PolicyKind::TransCoffee if !tile.is_base_layer() => {
                let others = mask & !(1 << level);
                marginal_unit_gain(level, others, &p[..self.level_bytes.len()], &self.cost, &self.level_bytes_f)
                    .unwrap_or(0.0)
            }
            _ => p[usize::from(level)],
        }
    }

    fn admit(&mut self, id: TileId, t: u32) -> bool {
        let size = self.size_of(&id);
        self.clock += 1;
        let priority = if self.policy.recency() { self.clock as f64 } else { 0.0 };
        self.state.insert(CacheEntry {
            id,
            size,
            inserted_at: t,
            last_access: self.clock,
            priority,
        });
        true
    }

    fn touch(&mut self, id: &TileId) {
        self.clock += 1;
        let recency = self.policy.recency();
        if let Some(e) = self.state.get_mut(id) {
            e.last_access = self.clock;
            if recency {
                e.priority = self.clock as f64;
            }
        }
    }

    fn may_insert(&self, req: &Request) -> bool {
        match self.policy {
            PolicyKind::Ete0c => false,
            p if p.lf_star() => !self.marked.get(req.viewer).copied().unwrap_or(false),
            p if p.noc() => self.noc.as_ref().is_some_and(|w| w.weight(&req.id()) > 0.0),
            _ => true,
        }
    }

    /// Serves one request and restores the capacity and expiry invariants.
    pub fn access(&mut self, req: &Request, scores: &dyn ScoreView) -> AccessResult {
        self.expire(req.t);
        let id = req.id();
        let size = self.size_of(&id);
        if let Some(w) = &mut self.noc {
            w.request(id, size);
        }

        let mut result = AccessResult {
            outcome: Outcome::Miss,
            bytes_requested: size,
            bytes_served: size,
            bytes_origin: 0,
            transcode_level: None,
            inserted: false,
        };

        if self.policy == PolicyKind::ETranscoding && !req.tile.is_base_layer() {
            let top = TileId { tile: req.tile, level: self.top };
            if self.state.contains(&top) {
                self.touch(&top);
                result.outcome = if req.level == self.top { Outcome::Hit } else { Outcome::TranscodeHit };
            } else {
                result.bytes_origin = self.size_of(&top);
                result.inserted = self.admit(top, req.t);
            }
            if req.level != self.top {
                result.transcode_level = Some(req.level);
            }
        } else if self.state.contains(&id) {
            self.touch(&id);
            result.outcome = Outcome::Hit;
        } else if self.policy.transcodes()
            && self.state.higher_level(req.tile, req.level).is_some()
            && self.cost.transcoding_pays(req.level, size as f64)
        {
            let from = self.state.higher_level(req.tile, req.level).expect("checked above");
            self.touch(&TileId { tile: req.tile, level: from });
            result.outcome = Outcome::TranscodeHit;
            result.transcode_level = Some(req.level);
            if self.may_insert(req) {
                result.inserted = self.admit(id, req.t);
            }
        } else {
            result.bytes_origin = size;
            if self.may_insert(req) {
                result.inserted = self.admit(id, req.t);
            }
        }

        self.reprioritize(req.tile, scores);
        self.evict(scores);
        result
    }

    fn evict(&mut self, scores: &dyn ScoreView) {
        while self.state.over_capacity() {
            let victim = match &self.noc {
                Some(w) => self.state.victim_by(|e| w.weight(&e.id)),
                None => self.state.victim(),
            };
            let Some(victim) = victim else { break };
            self.state.remove(&victim);
            if self.policy == PolicyKind::TransCoffee {
                self.reprioritize(victim.tile, scores);
            }
        }
    }
}
