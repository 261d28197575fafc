//! The physical cache: entries keyed by tile and level, with byte accounting.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::trace::{TileId, TileKey};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CacheEntry {
    pub id: TileId,
    pub size: u64,
    /// Step at which the entry was inserted.
    pub inserted_at: u32,
    /// Access clock value of the last hit or insertion.
    pub last_access: u64,
    /// Eviction priority; lowest goes first.
    pub priority: f64,
}

/// Eviction order: lowest priority, then oldest segment, then largest size,
/// then key.
pub fn eviction_order(a: &CacheEntry, pa: f64, b: &CacheEntry, pb: f64) -> Ordering {
    pa.total_cmp(&pb)
        .then(a.id.segment().cmp(&b.id.segment()))
        .then(b.size.cmp(&a.size))
        .then(a.id.cmp(&b.id))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CacheState {
    capacity: u64,
    occupancy: u64,
    entries: BTreeMap<TileId, CacheEntry>,
}

impl CacheState {
    pub fn new(capacity: u64) -> Self {
        Self {
            capacity,
            occupancy: 0,
            entries: BTreeMap::new(),
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn over_capacity(&self) -> bool {
        self.occupancy > self.capacity
    }

    pub fn contains(&self, id: &TileId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &TileId) -> Option<&CacheEntry> {
        self.entries.get(id)
    }

    pub fn get_mut(&mut self, id: &TileId) -> Option<&mut CacheEntry> {
        self.entries.get_mut(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CacheEntry> {
        self.entries.values()
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut CacheEntry> {
        self.entries.values_mut()
    }

    /// Cached levels of `tile` as a bitmask.
    pub fn levels(&self, tile: TileKey) -> u8 {
        self.entries
            .range(TileId { tile, level: 0 }..=TileId { tile, level: u8::MAX })
            .fold(0u8, |m, (id, _)| m | (1u8 << id.level.min(7)))
    }

    /// Lowest cached level of `tile` strictly above `level`.
    pub fn higher_level(&self, tile: TileKey, level: u8) -> Option<u8> {
        if level == u8::MAX {
            return None;
        }
        self.entries
            .range(TileId { tile, level: level + 1 }..=TileId { tile, level: u8::MAX })
            .next()
            .map(|(id, _)| id.level)
    }

    pub fn insert(&mut self, entry: CacheEntry) {
        if let Some(old) = self.entries.insert(entry.id, entry) {
            self.occupancy -= old.size;
        }
        self.occupancy += entry.size;
    }

    pub fn remove(&mut self, id: &TileId) -> Option<CacheEntry> {
        let e = self.entries.remove(id)?;
        self.occupancy -= e.size;
        Some(e)
    }

    /// Drops every entry whose segment is below `min_segment`.
    pub fn expire_before(&mut self, min_segment: u32) -> Vec<CacheEntry> {
        match self.entries.keys().next() {
            Some(first) if first.segment() < min_segment => {}
            _ => return Vec::new(),
        }
        let kept = self.entries.split_off(&TileId {
            tile: TileKey::new(min_segment, 0),
            level: 0,
        });
        let old = std::mem::replace(&mut self.entries, kept);
        let removed: Vec<CacheEntry> = old.into_values().collect();
        for e in &removed {
            self.occupancy -= e.size;
        }
        removed
    }

    /// Entry that goes first under `priority`, see [`eviction_order`].
    pub fn victim_by(&self, priority: impl Fn(&CacheEntry) -> f64) -> Option<TileId> {
        let mut best: Option<(&CacheEntry, f64)> = None;
        for e in self.entries.values() {
            let p = priority(e);
            match best {
                Some((b, pb)) if eviction_order(e, p, b, pb) != Ordering::Less => {}
                _ => best = Some((e, p)),
            }
        }
        best.map(|(e, _)| e.id)
    }

    /// Entry with the lowest stored priority.
    pub fn victim(&self) -> Option<TileId> {
        self.victim_by(|e| e.priority)
    }
}
