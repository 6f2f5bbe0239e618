//! Model-independent domain types: discourse items, mentions, utterances,
//! segment events, and the accessibility snapshot both attentional models
//! produce. The two candidate filters used by every resolver live here too.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

id_newtype!(
    /// Identifier of a [`DiscourseItem`].
    ItemId
);
id_newtype!(
    /// Identifier of an [`Utterance`].
    UttId
);
id_newtype!(
    /// Identifier of a [`Mention`].
    MentionId
);
id_newtype!(
    /// Identifier of a discourse segment named by Push/Pop/Return events.
    SegmentId
);

/// Prefix of selectional tags derived from predicates the dialogue has
/// applied to an entity.
pub const PRED_TAG_PREFIX: &str = "pred:";

pub fn pred_tag(lemma: &str) -> String {
    format!("{PRED_TAG_PREFIX}{lemma}")
}

pub fn is_pred_tag(tag: &str) -> bool {
    tag.starts_with(PRED_TAG_PREFIX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ItemKind {
    Entity,
    Proposition,
    SurfaceForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Gender {
    Masc,
    Fem,
    Neut,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Number {
    Sg,
    Pl,
    #[default]
    Unspecified,
}

impl Gender {
    pub fn agrees(self, other: Gender) -> bool {
        self == Gender::Unspecified || other == Gender::Unspecified || self == other
    }
}

impl Number {
    pub fn agrees(self, other: Number) -> bool {
        self == Number::Unspecified || other == Number::Unspecified || self == other
    }
}

/// An entity, proposition or surface-form record occupying attentional stores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscourseItem {
    pub id: ItemId,
    pub kind: ItemKind,
    pub gender: Gender,
    pub number: Number,
    /// Verb lemma; propositions only.
    pub predicate: Option<String>,
    /// Argument items; propositions only.
    pub args: Vec<ItemId>,
    /// Capability tags, including `pred:<lemma>` tags derived at load time.
    pub sel_classes: BTreeSet<String>,
    /// The item this surface form realizes; surface forms only.
    pub realizes: Option<ItemId>,
    /// Index of the utterance that introduced the item.
    pub introduced_at: usize,
}

impl DiscourseItem {
    pub fn entity(id: impl Into<ItemId>, gender: Gender, number: Number) -> Self {
        Self {
            id: id.into(),
            kind: ItemKind::Entity,
            gender,
            number,
            predicate: None,
            args: Vec::new(),
            sel_classes: BTreeSet::new(),
            realizes: None,
            introduced_at: 0,
        }
    }

    pub fn with_sel<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.sel_classes.extend(tags.into_iter().map(Into::into));
        self
    }
}

impl From<String> for ItemId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Item lookup by identifier. Ordered so iteration is deterministic.
pub type ItemTable = BTreeMap<ItemId, DiscourseItem>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MentionForm {
    Pronoun,
    VPEllipsis,
    DefiniteNP,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub id: MentionId,
    pub form: MentionForm,
    pub gender: Gender,
    pub number: Number,
    pub verb_lemma: Option<String>,
    pub required_sel: BTreeSet<String>,
    pub gold: ItemId,
}

impl Mention {
    pub fn pronoun(id: &str, gender: Gender, number: Number, gold: &str) -> Self {
        Self {
            id: MentionId::from(id),
            form: MentionForm::Pronoun,
            gender,
            number,
            verb_lemma: None,
            required_sel: BTreeSet::new(),
            gold: ItemId::from(gold),
        }
    }

    /// Required tags that come from the verb frame rather than the dialogue.
    pub fn static_requirements(&self) -> BTreeSet<String> {
        self.required_sel.iter().filter(|t| !is_pred_tag(t)).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: UttId,
    pub speaker: String,
    pub index: usize,
    /// Introduced or realized items, in order of realization.
    pub items: Vec<ItemId>,
    pub mentions: Vec<Mention>,
    /// Non-empty iff the utterance is informationally redundant.
    pub iru_antecedents: Vec<UttId>,
}

impl Utterance {
    pub fn is_iru(&self) -> bool {
        !self.iru_antecedents.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentEventKind {
    Push,
    Pop,
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentEvent {
    pub kind: SegmentEventKind,
    pub segment: SegmentId,
    /// Push only: conversants expect to come back to the interrupted segment.
    pub expect_return: bool,
    /// Index of the utterance this event precedes; equal to the utterance
    /// count for events trailing the last utterance.
    pub position: usize,
}

impl SegmentEvent {
    pub fn push(segment: &str, expect_return: bool, position: usize) -> Self {
        Self { kind: SegmentEventKind::Push, segment: segment.into(), expect_return, position }
    }

    pub fn pop(segment: &str, position: usize) -> Self {
        Self { kind: SegmentEventKind::Pop, segment: segment.into(), expect_return: false, position }
    }

    pub fn ret(segment: &str, position: usize) -> Self {
        Self { kind: SegmentEventKind::Return, segment: segment.into(), expect_return: false, position }
    }
}

/// Which attentional model produced a view or report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Stack,
    Cache,
}

/// Model-independent accessibility snapshot.
///
/// `immediate` is ordered most salient first; each producer documents its
/// own ordering. The three parts are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AccessibilityView {
    pub immediate: Vec<ItemId>,
    pub retrievable: BTreeSet<ItemId>,
    pub lost: BTreeSet<ItemId>,
}

impl AccessibilityView {
    pub fn is_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.immediate.iter().all(|i| seen.insert(i))
            && self.retrievable.iter().all(|i| seen.insert(i))
            && self.lost.iter().all(|i| seen.insert(i))
    }

    pub fn immediate_contains(&self, item: &ItemId) -> bool {
        self.immediate.contains(item)
    }
}

/// Keeps the candidates whose gender and number are compatible with the
/// mention. Unspecified on either side agrees with anything.
pub fn agreement_filter<'a>(candidates: &[&'a DiscourseItem], mention: &Mention) -> Vec<&'a DiscourseItem> {
    candidates.iter().copied().filter(|c| c.gender.agrees(mention.gender) && c.number.agrees(mention.number)).collect()
}

/// Keeps the candidates whose capability tags include every required tag.
pub fn selection_filter<'a>(candidates: &[&'a DiscourseItem], required: &BTreeSet<String>) -> Vec<&'a DiscourseItem> {
    candidates.iter().copied().filter(|c| required.is_subset(&c.sel_classes)).collect()
}
