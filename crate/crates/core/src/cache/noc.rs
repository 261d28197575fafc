//! Fractional caching weights for the online-gradient baseline.
//!
//! Each request adds `step * s` to the requested item's weight (sizes are
//! normalised by the largest tile, weights are capped at 1), then all weights
//! are projected back onto `{x >= 0, sum(s * x) <= C}`. That projection has
//! the form `x_i = max(y_i - lambda * s_i, 0)`, which shifts every ratio
//! `x_i / s_i` by the same amount. Keeping `k_i = x_i / s_i + Lambda` with a
//! running offset `Lambda` makes each projection cost `O(log n)` per item it
//! zeroes instead of touching every weight.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::trace::TileId;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Clone, Debug)]
pub struct NocWeights {
    step: f64,
    unit_bytes: f64,
    capacity: f64,
    lambda: f64,
    items: HashMap<TileId, (f64, f64)>,
    order: BTreeSet<(Key, TileId)>,
    /// `sum(s^2 * k)` and `sum(s^2)` over live items.
    a: f64,
    b: f64,
}

impl NocWeights {
    pub fn new(step: f64, capacity_bytes: u64, unit_bytes: u64) -> Self {
        let unit = unit_bytes.max(1) as f64;
        Self {
            step,
            unit_bytes: unit,
            capacity: capacity_bytes as f64 / unit,
            lambda: 0.0,
            items: HashMap::new(),
            order: BTreeSet::new(),
            a: 0.0,
            b: 0.0,
        }
    }

    /// Current fractional weight of `id` in `[0, 1]`.
    pub fn weight(&self, id: &TileId) -> f64 {
        self.items.get(id).map_or(0.0, |(s, k)| s * (k - self.lambda))
    }

    /// `sum(s * x)` in units of the largest tile.
    pub fn mass(&self) -> f64 {
        self.a - self.lambda * self.b
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn remove(&mut self, id: &TileId) -> bool {
        match self.items.remove(id) {
            Some((s, k)) => {
                self.order.remove(&(Key(k), *id));
                self.a -= s * s * k;
                self.b -= s * s;
                true
            }
            None => false,
        }
    }

    /// Gradient step on `id`, then projection. Returns the items whose weight
    /// dropped to zero (possibly including `id`).
    pub fn request(&mut self, id: TileId, size_bytes: u64) -> Vec<TileId> {
        let s = size_bytes as f64 / self.unit_bytes;
        let x = self.weight(&id);
        self.remove(&id);
        let y = (x + self.step * s).min(1.0);
        if s > 0.0 && y > 0.0 {
            let k = y / s + self.lambda;
            self.items.insert(id, (s, k));
            self.order.insert((Key(k), id));
            self.a += s * s * k;
            self.b += s * s;
        }
        self.project()
    }

    fn project(&mut self) -> Vec<TileId> {
        let mut dropped = Vec::new();
        while self.mass() > self.capacity && !self.items.is_empty() {
            let target = (self.a - self.capacity) / self.b;
            let &(Key(k_min), id) = self.order.first().expect("non-empty");
            if k_min <= target {
                self.remove(&id);
                dropped.push(id);
                if self.items.is_empty() {
                    self.a = 0.0;
                    self.b = 0.0;
                }
            } else {
                self.lambda = target;
                break;
            }
        }
        dropped
    }

    /// Forgets every item of a segment older than `min_segment`.
    pub fn expire(&mut self, min_segment: u32) {
        let old: Vec<TileId> = self
            .items
            .keys()
            .filter(|id| id.segment() < min_segment)
            .copied()
            .collect();
        for id in old {
            self.remove(&id);
        }
    }

    /// Folds the running offset back into the keys and recomputes the sums
    /// from scratch, bounding floating-point drift.
    pub fn rebase(&mut self) {
        let lambda = self.lambda;
        self.lambda = 0.0;
        self.order.clear();
        self.a = 0.0;
        self.b = 0.0;
        for (id, (s, k)) in self.items.iter_mut() {
            *k -= lambda;
            self.order.insert((Key(*k), *id));
            self.a += *s * *s * *k;
            self.b += *s * *s;
        }
    }
}
