//! Per-utterance simulation trace and its JSON serialization.

use serde::{Deserialize, Serialize};

use crate::discourse::{AccessibilityView, ItemId, SegmentId};
use crate::resolution::Resolution;

/// A change applied to an attentional store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "camelCase")]
pub enum StoreEvent {
    /// Removed from the cache to make room.
    Displace {
        item: ItemId,
    },
    /// Displaced item written to main memory.
    Store {
        item: ItemId,
    },
    /// Displaced surface form dropped for good.
    Discard {
        item: ItemId,
    },
    /// Moved from main memory into the cache.
    Retrieve {
        item: ItemId,
        cost: u64,
    },
    /// Re-created in the cache after having been discarded.
    Reinstate {
        item: ItemId,
    },
    Pin {
        item: ItemId,
        segment: SegmentId,
    },
    Unpin {
        item: ItemId,
        segment: SegmentId,
    },
    PushSpace {
        segment: SegmentId,
    },
    PopSpace {
        segment: SegmentId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRecord {
    pub utterance_index: usize,
    pub events_applied: Vec<StoreEvent>,
    pub view: AccessibilityView,
    pub resolutions: Vec<Resolution>,
    pub cumulative_effort: u64,
}

/// Serializes a trace as a JSON array, one record per utterance.
/// Field order is fixed, so equal traces give byte-identical output.
pub fn write_trace(trace: &[TraceRecord]) -> String {
    let mut out = serde_json::to_string_pretty(trace).expect("trace records always serialize");
    out.push('\n');
    out
}

pub fn read_trace(text: &str) -> Result<Vec<TraceRecord>, serde_json::Error> {
    serde_json::from_str(text)
}
