//! Focus-space stack model of attentional state.
//!
//! A new focus space is pushed when an embedded segment opens and popped when
//! it closes. Every space on the stack is accessible; popped items are lost.
//! An item lives in exactly one space: re-mentioning it moves it to the end
//! of the top space.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::discourse::{AccessibilityView, ItemId, SegmentEvent, SegmentEventKind, SegmentId, Utterance};
use crate::trace::StoreEvent;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StackError {
    #[error("segment `{0}` is already on the stack")]
    DuplicateSegment(SegmentId),
    #[error("pop of `{requested}` but the top space is {top}")]
    NotOnTop { requested: SegmentId, top: String },
    #[error("segment `{0}` is not on the stack")]
    Absent(SegmentId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FocusSpace {
    /// `None` for the implicit root space.
    pub segment: Option<SegmentId>,
    /// Most recently mentioned last.
    pub items: Vec<ItemId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FocusStack {
    /// Bottom first; the last space is the current segment.
    pub spaces: Vec<FocusSpace>,
    pub popped: BTreeSet<ItemId>,
}

impl Default for FocusStack {
    fn default() -> Self {
        Self::new()
    }
}

impl FocusStack {
    pub fn new() -> Self {
        Self { spaces: vec![FocusSpace { segment: None, items: Vec::new() }], popped: BTreeSet::new() }
    }

    pub fn top(&self) -> &FocusSpace {
        self.spaces.last().expect("root space is never popped")
    }

    fn top_mut(&mut self) -> &mut FocusSpace {
        self.spaces.last_mut().expect("root space is never popped")
    }

    fn position_of(&self, segment: &SegmentId) -> Option<usize> {
        self.spaces.iter().rposition(|s| s.segment.as_ref() == Some(segment))
    }

    fn pop_space(&mut self, log: &mut Vec<StoreEvent>) {
        let space = self.spaces.pop().expect("caller checked a non-root space is on top");
        self.popped.extend(space.items);
        log.push(StoreEvent::PopSpace { segment: space.segment.expect("root space is never popped") });
    }

    /// Applies a segment event, returning the space pushes and pops it caused.
    pub fn apply_event(&mut self, event: &SegmentEvent) -> Result<Vec<StoreEvent>, StackError> {
        let mut log = Vec::new();
        match event.kind {
            SegmentEventKind::Push => {
                if self.position_of(&event.segment).is_some() {
                    return Err(StackError::DuplicateSegment(event.segment.clone()));
                }
                self.spaces.push(FocusSpace { segment: Some(event.segment.clone()), items: Vec::new() });
                log.push(StoreEvent::PushSpace { segment: event.segment.clone() });
            }
            SegmentEventKind::Pop => {
                if self.top().segment.as_ref() != Some(&event.segment) {
                    let top = match &self.top().segment {
                        Some(s) => format!("`{s}`"),
                        None => "the root".to_owned(),
                    };
                    return Err(StackError::NotOnTop { requested: event.segment.clone(), top });
                }
                self.pop_space(&mut log);
            }
            SegmentEventKind::Return => {
                let pos = self.position_of(&event.segment).ok_or_else(|| StackError::Absent(event.segment.clone()))?;
                while self.spaces.len() > pos + 1 {
                    self.pop_space(&mut log);
                }
            }
        }
        Ok(log)
    }

    /// Moves every item of the utterance to the end of the top space.
    pub fn apply_utterance(&mut self, utt: &Utterance) {
        for item in &utt.items {
            for space in &mut self.spaces {
                space.items.retain(|i| i != item);
            }
            self.popped.remove(item);
            self.top_mut().items.push(item.clone());
        }
    }

    /// Spaces top to bottom, each most recent first. Nothing is retrievable;
    /// popped items are lost.
    pub fn view(&self) -> AccessibilityView {
        AccessibilityView {
            immediate: self.spaces.iter().rev().flat_map(|s| s.items.iter().rev().cloned()).collect(),
            retrievable: BTreeSet::new(),
            lost: self.popped.clone(),
        }
    }
}
