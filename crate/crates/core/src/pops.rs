//! Return-pop classification.
//!
//! A return pop resumes an earlier segment with a pronoun whose antecedent
//! lies in that segment. The classifier asks how much cue information it
//! takes to single out the antecedent: the pronoun's agreement features, then
//! the verb frame's static selectional tags, then `pred:` tags the dialogue
//! itself established, then an IRU at the return, and finally whether the
//! competitor was ever central.

use serde::Serialize;
use thiserror::Error;

use crate::discourse::{
    agreement_filter, is_pred_tag, selection_filter, DiscourseItem, ItemKind, Mention, SegmentEventKind,
};
use crate::transcript::{CaseAnnotation, Transcript};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReturnPopCase {
    pub case_id: String,
    pub mention: Mention,
    /// Entities introduced from the start of the resumed segment up to the
    /// return, most recently introduced first.
    pub candidates_at_return: Vec<DiscourseItem>,
    pub iru_at_return: bool,
    pub competitor_ever_central: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PopClassification {
    PronounSufficient,
    VerbFrameResolved,
    DialogueConstraintResolved,
    IRUResolved,
    CentralityResolved,
    Ambiguous,
}

impl PopClassification {
    pub const ALL: [PopClassification; 6] = [
        PopClassification::PronounSufficient,
        PopClassification::VerbFrameResolved,
        PopClassification::DialogueConstraintResolved,
        PopClassification::IRUResolved,
        PopClassification::CentralityResolved,
        PopClassification::Ambiguous,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PopError {
    #[error("case `{case}`: mention `{mention}` not found")]
    MissingMention { case: String, mention: String },
    #[error("case `{case}`: RETURN to `{segment}` has no matching PUSH")]
    MissingPush { case: String, segment: String },
    #[error("case `{case}`: gold antecedent `{gold}` is not among the candidates at the return")]
    GoldNotCandidate { case: String, gold: String },
}

impl ReturnPopCase {
    pub fn from_annotation(transcript: &Transcript, case: &CaseAnnotation) -> Result<Self, PopError> {
        let ret = &transcript.events[case.event_index];
        let (_, mention) = transcript
            .find_mention(&case.mention)
            .ok_or_else(|| PopError::MissingMention { case: case.id.clone(), mention: case.mention.to_string() })?;
        let push = transcript.events[..case.event_index]
            .iter()
            .find(|e| e.kind == SegmentEventKind::Push && e.segment == ret.segment)
            .ok_or_else(|| PopError::MissingPush { case: case.id.clone(), segment: ret.segment.to_string() })?;
        let mut candidates = Vec::new();
        for utt in transcript.utterances[push.position..ret.position].iter().rev() {
            for id in utt.items.iter().rev() {
                let item = &transcript.items[id];
                if item.kind == ItemKind::Entity && item.introduced_at == utt.index {
                    candidates.push(item.clone());
                }
            }
        }
        if !candidates.iter().any(|c| c.id == mention.gold) {
            return Err(PopError::GoldNotCandidate { case: case.id.clone(), gold: mention.gold.to_string() });
        }
        Ok(Self {
            case_id: case.id.clone(),
            mention: mention.clone(),
            candidates_at_return: candidates,
            iru_at_return: case.iru,
            competitor_ever_central: case.central_competitor,
        })
    }
}

/// Survivors after each filtering stage of the cue cascade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cascade {
    pub after_agreement: usize,
    pub after_static_selection: usize,
    pub after_dialogue_selection: usize,
    pub classification: PopClassification,
}

pub fn cascade(case: &ReturnPopCase) -> Cascade {
    let gold = &case.mention.gold;
    let only_gold = |s: &[&DiscourseItem]| s.len() == 1 && &s[0].id == gold;
    let all: Vec<&DiscourseItem> = case.candidates_at_return.iter().collect();

    let agreeing = agreement_filter(&all, &case.mention);
    let static_sel = selection_filter(&agreeing, &case.mention.static_requirements());
    let dialogue_tags = case.mention.required_sel.iter().filter(|t| is_pred_tag(t)).cloned().collect();
    let dialogue_sel = selection_filter(&static_sel, &dialogue_tags);

    let classification = if only_gold(&agreeing) {
        PopClassification::PronounSufficient
    } else if only_gold(&static_sel) {
        PopClassification::VerbFrameResolved
    } else if only_gold(&dialogue_sel) {
        PopClassification::DialogueConstraintResolved
    } else if case.iru_at_return {
        PopClassification::IRUResolved
    } else if !case.competitor_ever_central {
        PopClassification::CentralityResolved
    } else {
        PopClassification::Ambiguous
    };
    Cascade {
        after_agreement: agreeing.len(),
        after_static_selection: static_sel.len(),
        after_dialogue_selection: dialogue_sel.len(),
        classification,
    }
}

pub fn classify_return_pop(case: &ReturnPopCase) -> PopClassification {
    cascade(case).classification
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseResult {
    pub case_id: String,
    pub mention_id: String,
    pub classification: PopClassification,
    pub iru_at_return: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "PascalCase")]
pub struct Histogram {
    pub pronoun_sufficient: usize,
    pub verb_frame_resolved: usize,
    pub dialogue_constraint_resolved: usize,
    #[serde(rename = "IRUResolved")]
    pub iru_resolved: usize,
    pub centrality_resolved: usize,
    pub ambiguous: usize,
}

impl Histogram {
    pub fn count(&self, c: PopClassification) -> usize {
        match c {
            PopClassification::PronounSufficient => self.pronoun_sufficient,
            PopClassification::VerbFrameResolved => self.verb_frame_resolved,
            PopClassification::DialogueConstraintResolved => self.dialogue_constraint_resolved,
            PopClassification::IRUResolved => self.iru_resolved,
            PopClassification::CentralityResolved => self.centrality_resolved,
            PopClassification::Ambiguous => self.ambiguous,
        }
    }

    fn add(&mut self, c: PopClassification) {
        let slot = match c {
            PopClassification::PronounSufficient => &mut self.pronoun_sufficient,
            PopClassification::VerbFrameResolved => &mut self.verb_frame_resolved,
            PopClassification::DialogueConstraintResolved => &mut self.dialogue_constraint_resolved,
            PopClassification::IRUResolved => &mut self.iru_resolved,
            PopClassification::CentralityResolved => &mut self.centrality_resolved,
            PopClassification::Ambiguous => &mut self.ambiguous,
        };
        *slot += 1;
    }
}

/// Cases still carrying a competing antecedent after each cascade stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageCounts {
    pub total: usize,
    pub after_agreement: usize,
    pub after_static_selection: usize,
    pub after_dialogue_selection: usize,
    pub after_iru: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PopsReport {
    pub dialogue_id: String,
    pub cases: Vec<CaseResult>,
    pub histogram: Histogram,
    pub stage_counts: StageCounts,
    /// Resolved by the pronoun and its verb alone.
    pub pronoun_verb_sufficient: usize,
    pub iru_bearing: usize,
}

pub fn classify_corpus(transcript: &Transcript) -> Result<PopsReport, PopError> {
    let mut cases = Vec::new();
    let mut histogram = Histogram::default();
    let mut iru_bearing = 0;
    for annotation in &transcript.cases {
        let case = ReturnPopCase::from_annotation(transcript, annotation)?;
        let classification = classify_return_pop(&case);
        histogram.add(classification);
        iru_bearing += usize::from(case.iru_at_return);
        cases.push(CaseResult {
            case_id: case.case_id,
            mention_id: case.mention.id.to_string(),
            classification,
            iru_at_return: case.iru_at_return,
        });
    }
    let total = cases.len();
    let after_agreement = total - histogram.pronoun_sufficient;
    let after_static_selection = after_agreement - histogram.verb_frame_resolved;
    let after_dialogue_selection = after_static_selection - histogram.dialogue_constraint_resolved;
    let after_iru = after_dialogue_selection - histogram.iru_resolved;
    Ok(PopsReport {
        dialogue_id: transcript.dialogue_id.clone(),
        pronoun_verb_sufficient: total - after_dialogue_selection,
        stage_counts: StageCounts {
            total,
            after_agreement,
            after_static_selection,
            after_dialogue_selection,
            after_iru,
        },
        cases,
        histogram,
        iru_bearing,
    })
}
