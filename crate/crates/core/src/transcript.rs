use crate::discourse::{
    pred_tag, ItemId, ItemKind, ItemTable, Mention, MentionId, SegmentEvent, SegmentEventKind, SegmentId, UttId,
    Utterance,
};

/// A return-pop case attached to a RETURN event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseAnnotation {
    pub id: String,
    pub mention: MentionId,
    /// An informationally redundant utterance occurs at the return.
    pub iru: bool,
    /// The competing antecedent was at some point the discourse center.
    pub central_competitor: bool,
    /// Index into [`Transcript::events`] of the RETURN this case belongs to.
    pub event_index: usize,
}

/// An annotated dialogue: utterances interleaved with segment events.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    pub dialogue_id: String,
    pub utterances: Vec<Utterance>,
    /// Ordered by position.
    pub events: Vec<SegmentEvent>,
    pub items: ItemTable,
    pub cases: Vec<CaseAnnotation>,
}

impl Transcript {
    pub fn events_before(&self, position: usize) -> impl Iterator<Item = &SegmentEvent> {
        self.events.iter().filter(move |e| e.position == position)
    }

    /// Events after the last utterance.
    pub fn trailing_events(&self) -> impl Iterator<Item = &SegmentEvent> {
        self.events_before(self.utterances.len())
    }

    pub fn utterance(&self, id: &UttId) -> Option<&Utterance> {
        self.utterances.iter().find(|u| &u.id == id)
    }

    pub fn find_mention(&self, id: &MentionId) -> Option<(&Utterance, &Mention)> {
        self.utterances.iter().find_map(|u| u.mentions.iter().find(|m| &m.id == id).map(|m| (u, m)))
    }

    pub fn mentions(&self) -> impl Iterator<Item = &Mention> {
        self.utterances.iter().flat_map(|u| u.mentions.iter())
    }

    /// Innermost open segment for every utterance; `None` is the implicit root.
    pub fn segment_of_utterances(&self) -> Vec<Option<SegmentId>> {
        let mut open: Vec<SegmentId> = Vec::new();
        let mut out = Vec::with_capacity(self.utterances.len());
        for utt in &self.utterances {
            for ev in self.events_before(utt.index) {
                apply_nesting(&mut open, ev);
            }
            out.push(open.last().cloned());
        }
        out
    }

    /// Segments open (innermost last) just before the event at `event_index`
    /// is applied.
    pub fn open_segments_before_event(&self, event_index: usize) -> Vec<SegmentId> {
        let mut open = Vec::new();
        for ev in &self.events[..event_index] {
            apply_nesting(&mut open, ev);
        }
        open
    }

    /// Adds a `pred:<lemma>` tag to every argument of every proposition.
    pub(crate) fn derive_pred_tags(items: &mut ItemTable) {
        let derived: Vec<(ItemId, String)> = items
            .values()
            .filter(|i| i.kind == ItemKind::Proposition)
            .filter_map(|p| p.predicate.as_ref().map(|lemma| (p, pred_tag(lemma))))
            .flat_map(|(p, tag)| p.args.iter().map(move |a| (a.clone(), tag.clone())))
            .collect();
        for (arg, tag) in derived {
            if let Some(item) = items.get_mut(&arg) {
                item.sel_classes.insert(tag);
            }
        }
    }
}

fn apply_nesting(open: &mut Vec<SegmentId>, ev: &SegmentEvent) {
    match ev.kind {
        SegmentEventKind::Push => open.push(ev.segment.clone()),
        SegmentEventKind::Pop => {
            open.pop();
        }
        SegmentEventKind::Return => {
            if let Some(pos) = open.iter().rposition(|s| s == &ev.segment) {
                open.truncate(pos + 1);
            }
        }
    }
}
