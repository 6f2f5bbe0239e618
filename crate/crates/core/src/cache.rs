//! Cache model of attentional state.
//!
//! Working memory is a small cache in front of an unbounded main memory.
//! Items enter the cache when an utterance realizes them, are displaced to
//! main memory by least-recently-used replacement, and come back by cued
//! retrieval at a cost. Surface forms are never stored: a displaced surface
//! form is discarded and only a speaker re-realizing it brings it back.
//!
//! Pins implement preferential retention across an interruption that is
//! expected to end in a return. A `PUSH ... expect-return` pins the whole
//! cache, and while that segment is the innermost open segment the items its
//! utterances use are pinned with it, since the interruption's working set is
//! in use too. Replacement takes unpinned entries first, so pins only give way
//! once everything left in the cache is pinned.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::discourse::{AccessibilityView, ItemId, ItemKind, SegmentEvent, SegmentEventKind, SegmentId, Utterance};
use crate::trace::StoreEvent;
use crate::transcript::Transcript;

/// Default cache size, in items.
pub const DEFAULT_CAPACITY: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Finite(NonZeroUsize),
    Infinite,
}

impl Capacity {
    pub fn finite(n: usize) -> Option<Self> {
        NonZeroUsize::new(n).map(Capacity::Finite)
    }

    pub fn limit(self) -> Option<usize> {
        match self {
            Capacity::Finite(n) => Some(n.get()),
            Capacity::Infinite => None,
        }
    }

    fn admits(self, count: usize) -> bool {
        self.limit().is_none_or(|l| count <= l)
    }
}

impl Default for Capacity {
    fn default() -> Self {
        Capacity::finite(DEFAULT_CAPACITY).expect("default capacity is positive")
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Finite(n) => write!(f, "{n}"),
            Capacity::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Capacity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            return Ok(Capacity::Infinite);
        }
        let n: usize = s.parse().map_err(|_| format!("capacity must be a positive integer or `inf`, got `{s}`"))?;
        Capacity::finite(n).ok_or_else(|| "capacity must be positive".to_owned())
    }
}

impl Serialize for Capacity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Capacity::Finite(n) => s.serialize_u64(n.get() as u64),
            Capacity::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CacheError {
    #[error("`{0}` was discarded and cannot be retrieved")]
    RetrievalFailure(ItemId),
    #[error("cue set of {requested} items exceeds cache capacity {capacity}")]
    CueSetTooLarge { requested: usize, capacity: usize },
    #[error("`{0}` is neither cached nor in main memory")]
    NotInMemory(ItemId),
    #[error("cannot evict from an empty cache")]
    EmptyCache,
    #[error("segment `{0}` is not open")]
    UnknownSegment(SegmentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Stored,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub item: ItemId,
    pub pinned: bool,
    pub last_use: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct OpenSegment {
    id: SegmentId,
    expect_return: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheState {
    entries: Vec<CacheEntry>,
    capacity: Capacity,
    main_memory: BTreeSet<ItemId>,
    discarded: BTreeSet<ItemId>,
    effort: u64,
    step: u64,
    pin_owners: BTreeMap<SegmentId, BTreeSet<ItemId>>,
    /// Last touch of every item ever cached, including displaced ones.
    history: BTreeMap<ItemId, u64>,
    kinds: BTreeMap<ItemId, ItemKind>,
    open: Vec<OpenSegment>,
}

impl CacheState {
    pub fn new(capacity: Capacity) -> Self {
        Self {
            entries: Vec::new(),
            capacity,
            main_memory: BTreeSet::new(),
            discarded: BTreeSet::new(),
            effort: 0,
            step: 0,
            pin_owners: BTreeMap::new(),
            history: BTreeMap::new(),
            kinds: BTreeMap::new(),
            open: Vec::new(),
        }
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn main_memory(&self) -> &BTreeSet<ItemId> {
        &self.main_memory
    }

    pub fn discarded(&self) -> &BTreeSet<ItemId> {
        &self.discarded
    }

    pub fn effort(&self) -> u64 {
        self.effort
    }

    pub fn pin_owners(&self) -> &BTreeMap<SegmentId, BTreeSet<ItemId>> {
        &self.pin_owners
    }

    pub fn contains(&self, item: &ItemId) -> bool {
        self.position(item).is_some()
    }

    fn position(&self, item: &ItemId) -> Option<usize> {
        self.entries.iter().position(|e| &e.item == item)
    }

    fn is_full(&self) -> bool {
        !self.capacity.admits(self.entries.len() + 1)
    }

    /// Segment whose pins absorb newly used items, if any.
    fn retaining_segment(&self) -> Option<&SegmentId> {
        self.open.last().filter(|s| s.expect_return).map(|s| &s.id)
    }

    fn pin_at(&mut self, idx: usize, segment: SegmentId, log: &mut Vec<StoreEvent>) {
        let entry = &mut self.entries[idx];
        if entry.pinned {
            return;
        }
        entry.pinned = true;
        self.pin_owners.entry(segment.clone()).or_default().insert(entry.item.clone());
        log.push(StoreEvent::Pin { item: entry.item.clone(), segment });
    }

    fn touch_at(&mut self, idx: usize, log: &mut Vec<StoreEvent>) {
        self.step += 1;
        let entry = &mut self.entries[idx];
        entry.last_use = self.step;
        self.history.insert(entry.item.clone(), self.step);
        if let Some(seg) = self.retaining_segment().cloned() {
            self.pin_at(idx, seg, log);
        }
    }

    /// Marks a cached item as used. Returns false when it is not cached.
    pub fn touch(&mut self, item: &ItemId) -> bool {
        let mut log = Vec::new();
        self.touch_logged(item, &mut log)
    }

    fn touch_logged(&mut self, item: &ItemId, log: &mut Vec<StoreEvent>) -> bool {
        match self.position(item) {
            Some(idx) => {
                self.touch_at(idx, log);
                true
            }
            None => false,
        }
    }

    /// Index of the replacement victim: least recently used unpinned entry,
    /// or the least recently used pinned one when everything is pinned.
    fn victim(&self) -> Option<usize> {
        let lru = |pinned: bool| {
            self.entries
                .iter()
                .enumerate()
                .filter(|(_, e)| e.pinned == pinned)
                .min_by_key(|(_, e)| e.last_use)
                .map(|(i, _)| i)
        };
        lru(false).or_else(|| lru(true))
    }

    /// Displaces one entry. Entities and propositions go to main memory,
    /// surface forms are discarded.
    pub fn evict_one(&mut self) -> Result<(ItemId, Disposition), CacheError> {
        let mut log = Vec::new();
        self.evict_logged(&mut log)
    }

    fn evict_logged(&mut self, log: &mut Vec<StoreEvent>) -> Result<(ItemId, Disposition), CacheError> {
        let idx = self.victim().ok_or(CacheError::EmptyCache)?;
        let entry = self.entries.remove(idx);
        if entry.pinned {
            for owned in self.pin_owners.values_mut() {
                owned.remove(&entry.item);
            }
            self.pin_owners.retain(|_, owned| !owned.is_empty());
        }
        log.push(StoreEvent::Displace { item: entry.item.clone() });
        let disposition = if self.kinds.get(&entry.item) == Some(&ItemKind::SurfaceForm) {
            self.discarded.insert(entry.item.clone());
            log.push(StoreEvent::Discard { item: entry.item.clone() });
            Disposition::Discarded
        } else {
            self.main_memory.insert(entry.item.clone());
            log.push(StoreEvent::Store { item: entry.item.clone() });
            Disposition::Stored
        };
        Ok((entry.item, disposition))
    }

    /// Adds a fresh entry, displacing as needed, and touches it.
    fn admit(&mut self, item: ItemId, log: &mut Vec<StoreEvent>) {
        while self.is_full() {
            self.evict_logged(log).expect("a full cache has entries");
        }
        self.entries.push(CacheEntry { item, pinned: false, last_use: 0 });
        let idx = self.entries.len() - 1;
        self.touch_at(idx, log);
    }

    /// Brings an item into the cache because an utterance realizes it.
    /// Never fails and costs nothing: present items are refreshed, stored
    /// ones come back from main memory, discarded ones are re-created.
    pub fn realize(&mut self, item: &ItemId, kind: ItemKind, log: &mut Vec<StoreEvent>) {
        self.kinds.entry(item.clone()).or_insert(kind);
        if self.touch_logged(item, log) {
            return;
        }
        if self.main_memory.remove(item) {
            log.push(StoreEvent::Retrieve { item: item.clone(), cost: 0 });
        } else if self.discarded.remove(item) {
            log.push(StoreEvent::Reinstate { item: item.clone() });
        }
        self.admit(item.clone(), log);
    }

    /// Cued retrieval from main memory. Items already cached are touched at
    /// no cost; every item moved costs `cost_per_item`.
    pub fn retrieve(&mut self, items: &[ItemId], cost_per_item: u64) -> Result<(u64, Vec<StoreEvent>), CacheError> {
        if let Some(limit) = self.capacity.limit() {
            if items.len() > limit {
                return Err(CacheError::CueSetTooLarge { requested: items.len(), capacity: limit });
            }
        }
        for item in items {
            if self.discarded.contains(item) {
                return Err(CacheError::RetrievalFailure(item.clone()));
            }
            if !self.contains(item) && !self.main_memory.contains(item) {
                return Err(CacheError::NotInMemory(item.clone()));
            }
        }
        let mut log = Vec::new();
        let mut delta = 0;
        for item in items {
            if self.touch_logged(item, &mut log) {
                continue;
            }
            // An earlier retrieval in this batch may have displaced it again.
            self.main_memory.remove(item);
            log.push(StoreEvent::Retrieve { item: item.clone(), cost: cost_per_item });
            self.admit(item.clone(), &mut log);
            delta += cost_per_item;
        }
        self.effort += delta;
        Ok((delta, log))
    }

    fn unpin_segment(&mut self, segment: &SegmentId, log: &mut Vec<StoreEvent>) {
        let Some(owned) = self.pin_owners.remove(segment) else { return };
        for item in owned {
            if let Some(idx) = self.position(&item) {
                self.entries[idx].pinned = false;
                log.push(StoreEvent::Unpin { item, segment: segment.clone() });
            }
        }
    }

    /// Applies the segment events preceding the utterance at `position`.
    ///
    /// Push with expect-return pins the cache. Pop and Return release the
    /// pins of every segment they close. Return also retrieves the items of
    /// the resumed segment's earlier utterances, most recently used first,
    /// leaving one slot free for the incoming utterance.
    pub fn apply_events<'e>(
        &mut self,
        transcript: &Transcript,
        position: usize,
        events: impl IntoIterator<Item = &'e SegmentEvent>,
        cost_per_item: u64,
    ) -> Result<Vec<StoreEvent>, CacheError> {
        let mut log = Vec::new();
        for ev in events {
            match ev.kind {
                SegmentEventKind::Push => {
                    self.open.push(OpenSegment { id: ev.segment.clone(), expect_return: ev.expect_return });
                    if ev.expect_return {
                        for idx in 0..self.entries.len() {
                            self.pin_at(idx, ev.segment.clone(), &mut log);
                        }
                    }
                }
                SegmentEventKind::Pop => {
                    if self.open.last().map(|s| &s.id) != Some(&ev.segment) {
                        return Err(CacheError::UnknownSegment(ev.segment.clone()));
                    }
                    self.open.pop();
                    self.unpin_segment(&ev.segment, &mut log);
                }
                SegmentEventKind::Return => {
                    let pos = self
                        .open
                        .iter()
                        .rposition(|s| s.id == ev.segment)
                        .ok_or_else(|| CacheError::UnknownSegment(ev.segment.clone()))?;
                    for closed in self.open.split_off(pos + 1).into_iter().rev() {
                        self.unpin_segment(&closed.id, &mut log);
                    }
                    let cues = self.return_cues(transcript, position, &ev.segment);
                    let (_, retrieved) = self.retrieve(&cues, cost_per_item)?;
                    log.extend(retrieved);
                }
            }
        }
        Ok(log)
    }

    fn return_cues(&self, transcript: &Transcript, position: usize, segment: &SegmentId) -> Vec<ItemId> {
        let membership = transcript.segment_of_utterances();
        let mut cues: Vec<ItemId> = Vec::new();
        for utt in transcript.utterances.iter().take(position) {
            if membership[utt.index].as_ref() != Some(segment) {
                continue;
            }
            for item in &utt.items {
                let known = self.contains(item) || self.main_memory.contains(item);
                if known && !cues.contains(item) {
                    cues.push(item.clone());
                }
            }
        }
        cues.sort_by_key(|i| std::cmp::Reverse(self.history.get(i).copied().unwrap_or(0)));
        if let Some(limit) = self.capacity.limit() {
            cues.truncate(limit - 1);
        }
        cues
    }

    /// Realizes the items of an IRU's antecedent utterances.
    pub fn reinstate_antecedents(&mut self, transcript: &Transcript, utt: &Utterance) -> Vec<StoreEvent> {
        let mut log = Vec::new();
        for ante in &utt.iru_antecedents {
            let Some(ante) = transcript.utterance(ante) else { continue };
            for item in &ante.items {
                self.realize(item, transcript.items[item].kind, &mut log);
            }
        }
        log
    }

    /// Inserts the utterance's own items.
    pub fn insert_items(&mut self, transcript: &Transcript, utt: &Utterance) -> Vec<StoreEvent> {
        let mut log = Vec::new();
        for item in &utt.items {
            self.realize(item, transcript.items[item].kind, &mut log);
        }
        log
    }

    /// Applies events, IRU reinstatement and the utterance's own items, in
    /// that order, returning everything that happened to the stores.
    pub fn process_utterance(
        &mut self,
        transcript: &Transcript,
        utt: &Utterance,
        events_before: &[SegmentEvent],
        cost_per_item: u64,
    ) -> Result<Vec<StoreEvent>, CacheError> {
        let mut log = self.apply_events(transcript, utt.index, events_before, cost_per_item)?;
        log.extend(self.reinstate_antecedents(transcript, utt));
        log.extend(self.insert_items(transcript, utt));
        Ok(log)
    }

    /// Cached items most recently used first; main memory is retrievable and
    /// discarded surface forms are lost.
    pub fn view(&self) -> AccessibilityView {
        let mut cached: Vec<&CacheEntry> = self.entries.iter().collect();
        cached.sort_by_key(|e| std::cmp::Reverse(e.last_use));
        AccessibilityView {
            immediate: cached.into_iter().map(|e| e.item.clone()).collect(),
            retrievable: self.main_memory.clone(),
            lost: self.discarded.clone(),
        }
    }

    /// Checks the structural invariants, describing the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.capacity.admits(self.entries.len()) {
            return Err(format!("{} entries exceed capacity {}", self.entries.len(), self.capacity));
        }
        let mut seen = BTreeSet::new();
        let mut uses = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(&e.item) {
                return Err(format!("`{}` cached twice", e.item));
            }
            if !uses.insert(e.last_use) {
                return Err(format!("last use {} shared", e.last_use));
            }
            let owners = self.pin_owners.values().filter(|s| s.contains(&e.item)).count();
            if e.pinned != (owners == 1) || owners > 1 {
                return Err(format!("`{}` pinned={} but owned by {owners} segments", e.item, e.pinned));
            }
        }
        for item in self.main_memory.iter().chain(&self.discarded) {
            if !seen.insert(item) {
                return Err(format!("`{item}` is in more than one store"));
            }
        }
        if let Some(bad) = self.discarded.iter().find(|i| self.kinds.get(*i) != Some(&ItemKind::SurfaceForm)) {
            return Err(format!("`{bad}` discarded but is not a surface form"));
        }
        if let Some((seg, _)) = self.pin_owners.iter().find(|(_, s)| s.is_empty()) {
            return Err(format!("empty pin record for `{seg}`"));
        }
        Ok(())
    }
}
