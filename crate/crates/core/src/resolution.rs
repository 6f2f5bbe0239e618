//! Anaphora resolution against an accessibility view, and the analysis of
//! what an informationally redundant utterance does to attentional state.

use std::collections::BTreeSet;
use std::num::NonZeroU64;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discourse::{
    agreement_filter, selection_filter, AccessibilityView, DiscourseItem, ItemId, ItemKind, ItemTable, Mention,
    MentionForm, MentionId, ModelKind, UttId, Utterance,
};
use crate::transcript::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    SurfaceFormLost,
    NoCandidate,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Outcome {
    Immediate { item: ItemId },
    AfterRetrieval { item: ItemId, effort: u64 },
    Failure { reason: FailureReason },
}

impl Outcome {
    pub fn item(&self) -> Option<&ItemId> {
        match self {
            Outcome::Immediate { item } | Outcome::AfterRetrieval { item, .. } => Some(item),
            Outcome::Failure { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Resolution {
    pub mention_id: MentionId,
    pub outcome: Outcome,
    pub candidates_considered: Vec<ItemId>,
    pub correct: bool,
}

/// Whether a resolver may strategically retrieve from main memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalMode {
    Forbidden,
    Allowed { cost: NonZeroU64 },
}

fn lookup<'a>(items: &'a ItemTable, ids: impl IntoIterator<Item = &'a ItemId>) -> Vec<&'a DiscourseItem> {
    ids.into_iter().filter_map(|id| items.get(id)).collect()
}

/// Entity candidates surviving agreement and selection, in input order.
fn nominal_survivors<'a>(candidates: Vec<&'a DiscourseItem>, mention: &Mention) -> Vec<&'a DiscourseItem> {
    let entities: Vec<_> = candidates.into_iter().filter(|i| i.kind == ItemKind::Entity).collect();
    selection_filter(&agreement_filter(&entities, mention), &mention.required_sel)
}

/// Items realized by the surface forms among the candidates, in input order.
fn elided_survivors<'a>(candidates: Vec<&'a DiscourseItem>, items: &'a ItemTable) -> Vec<&'a DiscourseItem> {
    let mut out: Vec<&DiscourseItem> = Vec::new();
    for realized in candidates.into_iter().filter_map(|c| c.realizes.as_ref()).filter_map(|r| items.get(r)) {
        if !out.iter().any(|o| o.id == realized.id) {
            out.push(realized);
        }
    }
    out
}

/// Resolves a mention against a view.
///
/// Survivors from `immediate` are taken in salience order and the first one
/// wins. Only when none survive, and retrieval is allowed, is main memory
/// searched; it has no salience order, so more than one survivor there is
/// ambiguous. VP ellipsis needs the surface form carrying its antecedent.
pub fn resolve(mention: &Mention, view: &AccessibilityView, items: &ItemTable, mode: RetrievalMode) -> Resolution {
    let survivors = |ids: Vec<&ItemId>| -> Vec<ItemId> {
        let cands = lookup(items, ids);
        let kept = match mention.form {
            MentionForm::VPEllipsis => elided_survivors(cands, items),
            MentionForm::Pronoun | MentionForm::DefiniteNP => nominal_survivors(cands, mention),
        };
        kept.into_iter().map(|i| i.id.clone()).collect()
    };
    let finish = |outcome: Outcome, candidates: Vec<ItemId>| Resolution {
        mention_id: mention.id.clone(),
        correct: outcome.item() == Some(&mention.gold),
        outcome,
        candidates_considered: candidates,
    };

    if mention.form == MentionForm::VPEllipsis {
        let carriers: BTreeSet<&ItemId> = items
            .values()
            .filter(|i| i.kind == ItemKind::SurfaceForm && i.realizes.as_ref() == Some(&mention.gold))
            .map(|i| &i.id)
            .collect();
        let carrier_lost = carriers.iter().any(|c| view.lost.contains(*c));
        let carrier_present = carriers.iter().any(|c| view.immediate.contains(c));
        if carrier_lost && !carrier_present {
            return finish(Outcome::Failure { reason: FailureReason::SurfaceFormLost }, Vec::new());
        }
    }

    let immediate = survivors(view.immediate.iter().collect());
    if let Some(first) = immediate.first() {
        return finish(Outcome::Immediate { item: first.clone() }, immediate);
    }
    let RetrievalMode::Allowed { cost } = mode else {
        return finish(Outcome::Failure { reason: FailureReason::NoCandidate }, Vec::new());
    };
    let stored = survivors(view.retrievable.iter().collect());
    let outcome = match stored.as_slice() {
        [] => Outcome::Failure { reason: FailureReason::NoCandidate },
        [only] => Outcome::AfterRetrieval { item: only.clone(), effort: cost.get() },
        _ => Outcome::Failure { reason: FailureReason::Ambiguous },
    };
    finish(outcome, stored)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IruFunction {
    RefreshInCache,
    RetrieveFromMemory,
    Reinstantiate,
    NotRedundant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ItemFunction {
    pub item: ItemId,
    pub function: IruFunction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IruReport {
    pub utterance_id: UttId,
    pub model: ModelKind,
    pub functions: Vec<ItemFunction>,
    /// The stack model gives the IRU nothing to do: every antecedent item is
    /// already immediately accessible.
    pub no_predicted_function: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolutionError {
    #[error("utterance `{0}` is not informationally redundant")]
    NotRedundant(UttId),
}

/// Classifies each antecedent item of an IRU by where it sits in the view
/// just before the IRU is processed.
pub fn analyze_iru(
    utt: &Utterance,
    transcript: &Transcript,
    view_before: &AccessibilityView,
    model: ModelKind,
) -> Result<IruReport, ResolutionError> {
    if !utt.is_iru() {
        return Err(ResolutionError::NotRedundant(utt.id.clone()));
    }
    let mut functions: Vec<ItemFunction> = Vec::new();
    let antecedent_items =
        utt.iru_antecedents.iter().filter_map(|a| transcript.utterance(a)).flat_map(|a| a.items.iter());
    for item in antecedent_items {
        if functions.iter().any(|f| &f.item == item) {
            continue;
        }
        let function = if view_before.immediate_contains(item) {
            IruFunction::RefreshInCache
        } else if view_before.retrievable.contains(item) {
            IruFunction::RetrieveFromMemory
        } else {
            IruFunction::Reinstantiate
        };
        functions.push(ItemFunction { item: item.clone(), function });
    }
    let no_predicted_function =
        model == ModelKind::Stack && functions.iter().all(|f| f.function == IruFunction::RefreshInCache);
    Ok(IruReport { utterance_id: utt.id.clone(), model, functions, no_predicted_function })
}
