//! Replays a transcript through an attentional model, resolving every
//! mention as it is reached, and compares the two models.

use std::num::NonZeroU64;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::cache::{CacheError, CacheState, Capacity};
use crate::discourse::{AccessibilityView, MentionId, ModelKind, SegmentEvent, UttId, Utterance};
use crate::format::{parse, ParseError};
use crate::pops::PopError;
use crate::resolution::{analyze_iru, resolve, IruReport, Outcome, Resolution, ResolutionError, RetrievalMode};
use crate::stack::{FocusStack, StackError};
use crate::trace::{write_trace, StoreEvent, TraceRecord};
use crate::transcript::Transcript;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Stack(#[from] StackError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
    #[error(transparent)]
    Pops(#[from] PopError),
}

impl SimError {
    /// 2 for malformed input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Parse(_) => 2,
            _ => 1,
        }
    }
}

/// The operations the replay loop needs from an attentional model.
pub trait AttentionModel {
    fn kind(&self) -> ModelKind;

    /// Applies the segment events preceding the utterance at `position`.
    fn begin(&mut self, t: &Transcript, position: usize, events: &[SegmentEvent]) -> Result<Vec<StoreEvent>, SimError>;

    /// Takes in the utterance's content once its events are applied.
    fn absorb(&mut self, t: &Transcript, utt: &Utterance) -> Vec<StoreEvent>;

    fn view(&self) -> AccessibilityView;

    fn retrieval_mode(&self) -> RetrievalMode;

    /// Lets the model react to having used an antecedent.
    fn commit(&mut self, resolution: &Resolution) -> Result<Vec<StoreEvent>, SimError>;

    fn effort(&self) -> u64;
}

impl AttentionModel for FocusStack {
    fn kind(&self) -> ModelKind {
        ModelKind::Stack
    }

    fn begin(&mut self, _: &Transcript, _: usize, events: &[SegmentEvent]) -> Result<Vec<StoreEvent>, SimError> {
        let mut log = Vec::new();
        for ev in events {
            log.extend(self.apply_event(ev)?);
        }
        Ok(log)
    }

    fn absorb(&mut self, _: &Transcript, utt: &Utterance) -> Vec<StoreEvent> {
        self.apply_utterance(utt);
        Vec::new()
    }

    fn view(&self) -> AccessibilityView {
        FocusStack::view(self)
    }

    fn retrieval_mode(&self) -> RetrievalMode {
        RetrievalMode::Forbidden
    }

    fn commit(&mut self, _: &Resolution) -> Result<Vec<StoreEvent>, SimError> {
        Ok(Vec::new())
    }

    fn effort(&self) -> u64 {
        0
    }
}

/// A cache together with the price of one cued retrieval.
#[derive(Debug, Clone)]
pub struct CacheModel {
    pub state: CacheState,
    pub cost: NonZeroU64,
}

impl CacheModel {
    pub fn new(capacity: Capacity, cost: NonZeroU64) -> Self {
        Self { state: CacheState::new(capacity), cost }
    }
}

impl AttentionModel for CacheModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Cache
    }

    fn begin(&mut self, t: &Transcript, position: usize, events: &[SegmentEvent]) -> Result<Vec<StoreEvent>, SimError> {
        Ok(self.state.apply_events(t, position, events, self.cost.get())?)
    }

    fn absorb(&mut self, t: &Transcript, utt: &Utterance) -> Vec<StoreEvent> {
        let mut log = self.state.reinstate_antecedents(t, utt);
        log.extend(self.state.insert_items(t, utt));
        log
    }

    fn view(&self) -> AccessibilityView {
        self.state.view()
    }

    fn retrieval_mode(&self) -> RetrievalMode {
        RetrievalMode::Allowed { cost: self.cost }
    }

    fn commit(&mut self, resolution: &Resolution) -> Result<Vec<StoreEvent>, SimError> {
        match &resolution.outcome {
            Outcome::Immediate { item } => {
                self.state.touch(item);
                Ok(Vec::new())
            }
            Outcome::AfterRetrieval { item, .. } if self.state.main_memory().contains(item) => {
                let (_, log) = self.state.retrieve(std::slice::from_ref(item), self.cost.get())?;
                Ok(log)
            }
            _ => Ok(Vec::new()),
        }
    }

    fn effort(&self) -> u64 {
        self.state.effort()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub trace: Vec<TraceRecord>,
    pub iru_reports: Vec<IruReport>,
}

/// Folds the transcript through the model, one trace record per utterance.
pub fn replay<M: AttentionModel>(t: &Transcript, model: &mut M) -> Result<Replay, SimError> {
    let mut trace = Vec::with_capacity(t.utterances.len());
    let mut iru_reports = Vec::new();
    for utt in &t.utterances {
        let events: Vec<SegmentEvent> = t.events_before(utt.index).cloned().collect();
        let mut log = model.begin(t, utt.index, &events)?;
        if utt.is_iru() {
            iru_reports.push(analyze_iru(utt, t, &model.view(), model.kind())?);
        }
        log.extend(model.absorb(t, utt));
        let mut resolutions = Vec::with_capacity(utt.mentions.len());
        for mention in &utt.mentions {
            let r = resolve(mention, &model.view(), &t.items, model.retrieval_mode());
            log.extend(model.commit(&r)?);
            resolutions.push(r);
        }
        trace.push(TraceRecord {
            utterance_index: utt.index,
            events_applied: log,
            view: model.view(),
            resolutions,
            cumulative_effort: model.effort(),
        });
    }
    let trailing: Vec<SegmentEvent> = t.trailing_events().cloned().collect();
    model.begin(t, t.utterances.len(), &trailing)?;
    Ok(Replay { trace, iru_reports })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub model: ModelKind,
    /// Ignored for stack runs.
    pub capacity: Capacity,
    pub retrieval_cost: NonZeroU64,
    pub transcript_path: PathBuf,
    pub trace_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(model: ModelKind, transcript_path: impl Into<PathBuf>) -> Self {
        Self {
            model,
            capacity: Capacity::default(),
            retrieval_cost: NonZeroU64::MIN,
            transcript_path: transcript_path.into(),
            trace_out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationReport {
    pub dialogue_id: String,
    pub model: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<Capacity>,
    pub utterances: usize,
    pub resolutions: Vec<Resolution>,
    pub correct: usize,
    pub iru_findings: Vec<IruReport>,
    pub total_effort: u64,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

pub fn load(path: &std::path::Path) -> Result<Transcript, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.to_owned(), source })?;
    Ok(parse(&text)?)
}

pub fn simulate(
    t: &Transcript,
    model: ModelKind,
    capacity: Capacity,
    cost: NonZeroU64,
) -> Result<SimulationReport, SimError> {
    let (replay, capacity) = match model {
        ModelKind::Stack => (replay(t, &mut FocusStack::new())?, None),
        ModelKind::Cache => (replay(t, &mut CacheModel::new(capacity, cost))?, Some(capacity)),
    };
    let resolutions: Vec<Resolution> = replay.trace.iter().flat_map(|r| r.resolutions.iter().cloned()).collect();
    Ok(SimulationReport {
        dialogue_id: t.dialogue_id.clone(),
        model,
        capacity,
        utterances: t.utterances.len(),
        correct: resolutions.iter().filter(|r| r.correct).count(),
        resolutions,
        iru_findings: replay.iru_reports,
        total_effort: replay.trace.last().map_or(0, |r| r.cumulative_effort),
        trace: replay.trace,
    })
}

/// Loads, simulates, and writes the trace if one was requested.
pub fn run(config: &RunConfig) -> Result<SimulationReport, SimError> {
    let t = load(&config.transcript_path)?;
    let report = simulate(&t, config.model, config.capacity, config.retrieval_cost)?;
    if let Some(path) = &config.trace_out {
        std::fs::write(path, write_trace(&report.trace))
            .map_err(|source| SimError::Io { path: path.clone(), source })?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MentionComparison {
    pub mention_id: MentionId,
    pub stack: Outcome,
    pub cache: Outcome,
    pub diverges: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IruComparison {
    pub utterance_id: UttId,
    pub stack: IruReport,
    pub cache: IruReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EffortTotals {
    pub stack: u64,
    pub cache: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DivergenceReport {
    pub dialogue_id: String,
    pub per_mention: Vec<MentionComparison>,
    pub iru_findings: Vec<IruComparison>,
    pub total_effort: EffortTotals,
}

impl DivergenceReport {
    pub fn divergent(&self) -> impl Iterator<Item = &MentionComparison> {
        self.per_mention.iter().filter(|m| m.diverges)
    }
}

/// Runs both models with default settings and joins their outcomes.
pub fn compare(t: &Transcript) -> Result<DivergenceReport, SimError> {
    let stack = simulate(t, ModelKind::Stack, Capacity::default(), NonZeroU64::MIN)?;
    let cache = simulate(t, ModelKind::Cache, Capacity::default(), NonZeroU64::MIN)?;
    let per_mention = stack
        .resolutions
        .iter()
        .zip(&cache.resolutions)
        .map(|(s, c)| MentionComparison {
            mention_id: s.mention_id.clone(),
            diverges: s.outcome != c.outcome,
            stack: s.outcome.clone(),
            cache: c.outcome.clone(),
        })
        .collect();
    let iru_findings = stack
        .iru_findings
        .into_iter()
        .zip(cache.iru_findings)
        .map(|(s, c)| IruComparison { utterance_id: s.utterance_id.clone(), stack: s, cache: c })
        .collect();
    Ok(DivergenceReport {
        dialogue_id: t.dialogue_id.clone(),
        per_mention,
        iru_findings,
        total_effort: EffortTotals { stack: stack.total_effort, cache: cache.total_effort },
    })
}
