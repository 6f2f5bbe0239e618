//! Shared fixtures, a random dialogue generator and the property checks run
//! by both the property suite and the acceptance gate.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::num::NonZeroU64;
use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use attnsim::cache::{CacheState, Capacity};
use attnsim::discourse::{agreement_filter, ItemKind, MentionForm, SegmentEvent};
use attnsim::sim::{AttentionModel, CacheModel};
use attnsim::trace::StoreEvent;
use attnsim::{
    parse, resolve, simulate, write_trace, write_transcript, FocusStack, ItemId, ModelKind, RetrievalMode, Transcript,
};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> Transcript {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    parse(&text).expect("fixture parses")
}

pub const FIXTURES: [&str; 4] = ["dialogue_a.dlg", "dialogue_b.dlg", "dialogue_c.dlg", "return_pops.dlg"];

/// One step of a generated dialogue. Arguments are raw bytes interpreted
/// against the state reached so far, so every script renders to a valid
/// transcript.
#[derive(Debug, Clone)]
pub enum Op {
    Utter { items: Vec<usize>, arg: u8, iru: bool },
    Push { expect_return: bool },
    Pop,
    Return { arg: u8 },
}

#[derive(Debug, Clone)]
pub struct Script {
    /// Attribute seed per item; its length is the size of the item pool.
    pub seeds: Vec<u8>,
    pub ops: Vec<Op>,
}

const GENDERS: [&str; 3] = ["m", "f", "n"];
const NUMBERS: [&str; 2] = ["sg", "pl"];
const TAGS: [Option<&str>; 3] = [None, Some("animate"), Some("boltable")];
const LEMMAS: [&str; 2] = ["work", "ride"];

fn item_id(idx: usize) -> String {
    format!("i{idx}")
}

impl Script {
    fn seed(&self, idx: usize) -> u8 {
        self.seeds.get(idx).copied().unwrap_or(0)
    }

    fn first_prop(&self) -> Option<usize> {
        (0..self.seeds.len()).find(|&i| self.seed(i) % 3 == 1)
    }

    fn first_entity(&self) -> Option<usize> {
        (0..self.seeds.len()).find(|&i| self.seed(i).is_multiple_of(3))
    }

    fn kind(&self, idx: usize) -> ItemKind {
        match self.seed(idx) % 3 {
            1 => ItemKind::Proposition,
            2 if self.first_prop().is_some() => ItemKind::SurfaceForm,
            _ => ItemKind::Entity,
        }
    }

    fn declaration(&self, idx: usize) -> String {
        let s = self.seed(idx) as usize;
        let id = item_id(idx);
        match self.kind(idx) {
            ItemKind::Entity => {
                let mut line =
                    format!("ITEM {id} kind=entity gender={} num={}", GENDERS[(s / 3) % 3], NUMBERS[(s / 9) % 2]);
                if let Some(tag) = TAGS[(s / 18) % 3] {
                    let _ = write!(line, " sel={tag}");
                }
                line
            }
            ItemKind::Proposition => {
                let mut line = format!("ITEM {id} kind=prop pred={}", LEMMAS[(s / 3) % 2]);
                if let Some(e) = self.first_entity() {
                    let _ = write!(line, " args={}", item_id(e));
                }
                line
            }
            ItemKind::SurfaceForm => {
                format!("ITEM {id} kind=surface realizes={}", item_id(self.first_prop().expect("checked by kind")))
            }
        }
    }

    fn dependency(&self, idx: usize) -> Option<usize> {
        match self.kind(idx) {
            ItemKind::Entity => None,
            ItemKind::Proposition => self.first_entity(),
            ItemKind::SurfaceForm => self.first_prop(),
        }
    }

    /// Writes one item of an utterance, declaring whatever it refers to first.
    fn emit_item(&self, idx: usize, declared: &mut Vec<usize>, seen: &mut BTreeSet<usize>, out: &mut String) {
        if !seen.insert(idx) {
            return;
        }
        if declared.contains(&idx) {
            let _ = writeln!(out, "ITEM {}", item_id(idx));
            return;
        }
        if let Some(dep) = self.dependency(idx).filter(|d| !declared.contains(d)) {
            self.emit_item(dep, declared, seen, out);
        }
        declared.push(idx);
        let _ = writeln!(out, "{}", self.declaration(idx));
    }

    /// Renders the script in the transcript line format.
    pub fn render(&self) -> String {
        let mut out = String::from("DIALOGUE generated\n");
        let mut declared: Vec<usize> = Vec::new();
        let mut open: Vec<String> = Vec::new();
        let (mut utts, mut segs, mut mentions) = (0usize, 0usize, 0usize);
        for op in &self.ops {
            match op {
                Op::Utter { items, arg, iru } => {
                    let _ = write!(out, "UTT u{utts} speaker={}", if utts % 2 == 0 { "A" } else { "B" });
                    if *iru && utts > 0 {
                        let _ = write!(out, " iru=u{}", *arg as usize % utts);
                    }
                    out.push('\n');
                    let mut seen = BTreeSet::new();
                    for &idx in items {
                        self.emit_item(idx, &mut declared, &mut seen, &mut out);
                    }
                    let a = *arg as usize;
                    let of_kind = |k: ItemKind| -> Vec<usize> {
                        declared.iter().copied().filter(|&i| i < self.seeds.len() && self.kind(i) == k).collect()
                    };
                    match a % 4 {
                        0 => {
                            let entities = of_kind(ItemKind::Entity);
                            if !entities.is_empty() {
                                let gold = entities[(a / 4) % entities.len()];
                                let _ = writeln!(
                                    out,
                                    "PRON m{mentions} gender={} num={} gold={}",
                                    GENDERS[(a / 16) % 3],
                                    NUMBERS[(a / 48) % 2],
                                    item_id(gold)
                                );
                                mentions += 1;
                            }
                        }
                        1 => {
                            let props = of_kind(ItemKind::Proposition);
                            if !props.is_empty() {
                                let gold = props[(a / 4) % props.len()];
                                let _ = writeln!(out, "ELLIPSIS m{mentions} gold={}", item_id(gold));
                                mentions += 1;
                            }
                        }
                        _ => {}
                    }
                    utts += 1;
                }
                Op::Push { expect_return } => {
                    let seg = format!("s{segs}");
                    segs += 1;
                    let _ = writeln!(out, "PUSH {seg}{}", if *expect_return { " expect-return" } else { "" });
                    open.push(seg);
                }
                Op::Pop => {
                    if let Some(seg) = open.pop() {
                        let _ = writeln!(out, "POP {seg}");
                    }
                }
                Op::Return { arg } => {
                    if !open.is_empty() {
                        let keep = *arg as usize % open.len() + 1;
                        let _ = writeln!(out, "RETURN {}", open[keep - 1]);
                        open.truncate(keep);
                    }
                }
            }
        }
        out
    }

    pub fn transcript(&self) -> Transcript {
        let text = self.render();
        parse(&text).unwrap_or_else(|e| panic!("generated transcript rejected: {e}\n{text}"))
    }

    /// Inserts a closed segment with one utterance of fresh entities before
    /// op `at`. Returns the new script, the index of the inserted utterance
    /// and the fresh item ids.
    pub fn with_interruption(&self, at: usize, fresh: usize) -> (Script, usize, BTreeSet<ItemId>) {
        let at = at.min(self.ops.len());
        let utt_index = self.ops[..at].iter().filter(|op| matches!(op, Op::Utter { .. })).count();
        let base = self.seeds.len().max(20);
        let items: Vec<usize> = (base..base + fresh).collect();
        let ids = items.iter().map(|&i| ItemId::from(item_id(i))).collect();
        let mut ops = self.ops.clone();
        // Arg 2 requests no mention, so the inserted utterance only adds items.
        ops.splice(at..at, [Op::Push { expect_return: false }, Op::Utter { items, arg: 2, iru: false }, Op::Pop]);
        (Script { seeds: self.seeds.clone(), ops }, utt_index, ids)
    }
}

fn arb_op(n: usize) -> impl Strategy<Value = Op> {
    prop_oneof![
        6 => (prop::collection::vec(0..n, 0..4), any::<u8>(), prop::bool::weighted(0.15))
            .prop_map(|(items, arg, iru)| Op::Utter { items, arg, iru }),
        2 => any::<bool>().prop_map(|expect_return| Op::Push { expect_return }),
        1 => Just(Op::Pop),
        1 => any::<u8>().prop_map(|arg| Op::Return { arg }),
    ]
}

/// Dialogues over at most 20 items.
pub fn arb_script() -> impl Strategy<Value = Script> {
    (1usize..=20)
        .prop_flat_map(|n| (prop::collection::vec(any::<u8>(), n), prop::collection::vec(arb_op(n), 0..30)))
        .prop_map(|(seeds, ops)| Script { seeds, ops })
}

pub fn arb_capacity() -> impl Strategy<Value = Capacity> {
    prop_oneof![
        6 => (1usize..=8).prop_map(|n| Capacity::finite(n).unwrap()),
        1 => Just(Capacity::Infinite),
    ]
}

fn fail(msg: impl Into<String>) -> TestCaseError {
    TestCaseError::fail(msg.into())
}

/// Replays the transcript through a cache and checks capacity, store
/// disjointness and conservation after every step.
pub fn check_cache_invariants(script: &Script, capacity: Capacity, cost: u64) -> Result<(), TestCaseError> {
    let t = script.transcript();
    let mut model = CacheModel::new(capacity, NonZeroU64::new(cost).unwrap());
    let mut realized: BTreeSet<ItemId> = BTreeSet::new();
    let check = |model: &CacheModel, realized: &BTreeSet<ItemId>, step: &str| -> Result<(), TestCaseError> {
        let s = &model.state;
        s.check_invariants().map_err(|e| fail(format!("{step}: {e}")))?;
        if let Some(limit) = capacity.limit() {
            prop_assert!(s.entries().len() <= limit, "{step}: {} entries over {limit}", s.entries().len());
        }
        let stored: BTreeSet<ItemId> = s
            .entries()
            .iter()
            .map(|e| e.item.clone())
            .chain(s.main_memory().iter().cloned())
            .chain(s.discarded().iter().cloned())
            .collect();
        prop_assert_eq!(&stored, realized, "{}: stores do not conserve items", step);
        prop_assert!(model.view().is_disjoint(), "{step}: view not disjoint");
        Ok(())
    };
    for utt in &t.utterances {
        let events: Vec<SegmentEvent> = t.events_before(utt.index).cloned().collect();
        model.begin(&t, utt.index, &events).map_err(|e| fail(e.to_string()))?;
        check(&model, &realized, &format!("events before {}", utt.id))?;
        for ante in &utt.iru_antecedents {
            realized.extend(t.utterance(ante).unwrap().items.iter().cloned());
        }
        realized.extend(utt.items.iter().cloned());
        model.absorb(&t, utt);
        check(&model, &realized, &format!("utterance {}", utt.id))?;
        for mention in &utt.mentions {
            let r = resolve(mention, &model.view(), &t.items, model.retrieval_mode());
            model.commit(&r).map_err(|e| fail(e.to_string()))?;
            check(&model, &realized, &format!("mention {}", mention.id))?;
        }
    }
    Ok(())
}

/// One operation on a bare cache.
#[derive(Debug, Clone)]
pub enum CacheOp {
    Realize(usize),
    Touch(usize),
    Retrieve(usize),
    Push { expect_return: bool },
    Pop,
}

fn pool_item(idx: usize) -> (ItemId, ItemKind) {
    let kind = if idx % 3 == 2 { ItemKind::SurfaceForm } else { ItemKind::Entity };
    (ItemId::from(item_id(idx)), kind)
}

fn arb_cache_op(with_segments: bool) -> BoxedStrategy<CacheOp> {
    let basic = prop_oneof![
        5 => (0usize..20).prop_map(CacheOp::Realize),
        2 => (0usize..20).prop_map(CacheOp::Touch),
        2 => (0usize..20).prop_map(CacheOp::Retrieve),
    ];
    if with_segments {
        prop_oneof![
            9 => basic,
            1 => any::<bool>().prop_map(|expect_return| CacheOp::Push { expect_return }),
            1 => Just(CacheOp::Pop),
        ]
        .boxed()
    } else {
        basic.boxed()
    }
}

/// Capacity and operations over a pool of 20 items, without segment events.
pub fn arb_unpinned_ops() -> impl Strategy<Value = (usize, Vec<CacheOp>)> {
    (1usize..=6, prop::collection::vec(arb_cache_op(false), 0..60))
}

/// Capacity and operations over a pool of 20 items, with segment events.
pub fn arb_pinning_ops() -> impl Strategy<Value = (usize, Vec<CacheOp>)> {
    (1usize..=6, prop::collection::vec(arb_cache_op(true), 0..60))
}

fn displaced(log: &[StoreEvent]) -> Vec<ItemId> {
    log.iter()
        .filter_map(|e| match e {
            StoreEvent::Displace { item } => Some(item.clone()),
            _ => None,
        })
        .collect()
}

/// Brute-force LRU: a recency list, least recent first.
#[derive(Default)]
struct LruOracle {
    order: Vec<ItemId>,
    main: BTreeSet<ItemId>,
    discarded: BTreeSet<ItemId>,
}

impl LruOracle {
    fn bump(&mut self, item: &ItemId) -> bool {
        match self.order.iter().position(|i| i == item) {
            Some(p) => {
                let it = self.order.remove(p);
                self.order.push(it);
                true
            }
            None => false,
        }
    }

    fn admit(&mut self, item: ItemId, cap: usize, surface: impl Fn(&ItemId) -> bool) -> Vec<ItemId> {
        let mut out = Vec::new();
        while self.order.len() >= cap {
            let victim = self.order.remove(0);
            if surface(&victim) {
                self.discarded.insert(victim.clone());
            } else {
                self.main.insert(victim.clone());
            }
            out.push(victim);
        }
        self.main.remove(&item);
        self.discarded.remove(&item);
        self.order.push(item);
        out
    }
}

/// Without pins, eviction order and cache contents match the LRU oracle.
pub fn check_lru_oracle(cap: usize, ops: &[CacheOp]) -> Result<(), TestCaseError> {
    let mut cache = CacheState::new(Capacity::finite(cap).unwrap());
    let mut oracle = LruOracle::default();
    let is_surface = |i: &ItemId| i.as_str()[1..].parse::<usize>().unwrap() % 3 == 2;
    for (step, op) in ops.iter().enumerate() {
        let (got, want) = match *op {
            CacheOp::Realize(idx) => {
                let (item, kind) = pool_item(idx);
                let mut log = Vec::new();
                cache.realize(&item, kind, &mut log);
                let want = if oracle.bump(&item) { Vec::new() } else { oracle.admit(item, cap, is_surface) };
                (displaced(&log), want)
            }
            CacheOp::Touch(idx) => {
                let (item, _) = pool_item(idx);
                prop_assert_eq!(cache.touch(&item), oracle.bump(&item));
                (Vec::new(), Vec::new())
            }
            CacheOp::Retrieve(idx) => {
                let (item, _) = pool_item(idx);
                if !oracle.main.contains(&item) && !oracle.order.contains(&item) {
                    prop_assert!(cache.retrieve(std::slice::from_ref(&item), 1).is_err());
                    continue;
                }
                let (_, log) = cache.retrieve(std::slice::from_ref(&item), 1).map_err(|e| fail(e.to_string()))?;
                let want = if oracle.bump(&item) { Vec::new() } else { oracle.admit(item, cap, is_surface) };
                (displaced(&log), want)
            }
            CacheOp::Push { .. } | CacheOp::Pop => continue,
        };
        prop_assert_eq!(got, want, "displacements differ at step {}", step);
        let mut expected: Vec<ItemId> = oracle.order.clone();
        expected.reverse();
        prop_assert_eq!(&cache.view().immediate, &expected, "cache order differs at step {}", step);
        prop_assert_eq!(cache.main_memory(), &oracle.main);
        prop_assert_eq!(cache.discarded(), &oracle.discarded);
    }
    Ok(())
}

/// Every displacement takes the least recently used unpinned entry while
/// one exists, and only then the least recently used pinned one.
pub fn check_unpinned_before_pinned(cap: usize, ops: &[CacheOp]) -> Result<(), TestCaseError> {
    let empty = Transcript::default();
    let mut cache = CacheState::new(Capacity::finite(cap).unwrap());
    let mut open: Vec<String> = Vec::new();
    let mut next_seg = 0;
    for (step, op) in ops.iter().enumerate() {
        let before = cache.entries().to_vec();
        let log = match *op {
            CacheOp::Realize(idx) | CacheOp::Retrieve(idx) | CacheOp::Touch(idx) => {
                let (item, kind) = pool_item(idx);
                let mut log = Vec::new();
                cache.realize(&item, kind, &mut log);
                log
            }
            CacheOp::Push { expect_return } => {
                let seg = format!("s{next_seg}");
                next_seg += 1;
                let ev = SegmentEvent::push(&seg, expect_return, 0);
                open.push(seg);
                cache.apply_events(&empty, 0, [&ev], 1).map_err(|e| fail(e.to_string()))?
            }
            CacheOp::Pop => match open.pop() {
                Some(seg) => {
                    let ev = SegmentEvent::pop(&seg, 0);
                    cache.apply_events(&empty, 0, [&ev], 1).map_err(|e| fail(e.to_string()))?
                }
                None => continue,
            },
        };
        cache.check_invariants().map_err(|e| fail(format!("step {step}: {e}")))?;
        let victims = displaced(&log);
        let mut ranked = before;
        ranked.sort_by_key(|e| (e.pinned, e.last_use));
        let expected: Vec<ItemId> = ranked.into_iter().take(victims.len()).map(|e| e.item).collect();
        prop_assert_eq!(victims, expected, "wrong victims at step {}", step);
    }
    Ok(())
}

/// With unbounded capacity nothing is ever retrieved, and everything the
/// stack can see the cache can see too.
pub fn check_infinite_capacity(script: &Script) -> Result<(), TestCaseError> {
    let t = script.transcript();
    let stack = simulate(&t, ModelKind::Stack, Capacity::Infinite, NonZeroU64::MIN).map_err(|e| fail(e.to_string()))?;
    let cache = simulate(&t, ModelKind::Cache, Capacity::Infinite, NonZeroU64::MIN).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(cache.total_effort, 0);
    for (s, c) in stack.trace.iter().zip(&cache.trace) {
        prop_assert_eq!(c.cumulative_effort, 0);
        let seen: BTreeSet<&ItemId> = c.view.immediate.iter().collect();
        for item in &s.view.immediate {
            prop_assert!(seen.contains(item), "utterance {}: `{}` missing from cache", s.utterance_index, item);
        }
    }
    Ok(())
}

fn replay_stack(t: &Transcript) -> Result<FocusStack, TestCaseError> {
    let mut stack = FocusStack::new();
    for utt in &t.utterances {
        for ev in t.events_before(utt.index) {
            stack.apply_event(ev).map_err(|e| fail(e.to_string()))?;
        }
        stack.apply_utterance(utt);
    }
    for ev in t.trailing_events() {
        stack.apply_event(ev).map_err(|e| fail(e.to_string()))?;
    }
    Ok(stack)
}

/// Pushing and immediately popping a segment leaves the stack unchanged.
pub fn check_push_pop_restores(script: &Script) -> Result<(), TestCaseError> {
    let mut stack = replay_stack(&script.transcript())?;
    let before = stack.clone();
    stack.apply_event(&SegmentEvent::push("probe", true, 0)).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(stack.spaces.len(), before.spaces.len() + 1);
    stack.apply_event(&SegmentEvent::pop("probe", 0)).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(stack, before);
    Ok(())
}

/// A closed interruption introducing only fresh items changes nothing in the
/// stack views of the original utterances beyond adding those items to the
/// lost set.
pub fn check_stack_interruption_invariance(script: &Script, at: usize, fresh: usize) -> Result<(), TestCaseError> {
    let t = script.transcript();
    let (longer, inserted, fresh_ids) = script.with_interruption(at, fresh);
    let u = longer.transcript();
    let base = simulate(&t, ModelKind::Stack, Capacity::default(), NonZeroU64::MIN).map_err(|e| fail(e.to_string()))?;
    let ext = simulate(&u, ModelKind::Stack, Capacity::default(), NonZeroU64::MIN).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(ext.trace.len(), base.trace.len() + 1);
    let kept = ext.trace.iter().enumerate().filter(|(i, _)| *i != inserted).map(|(_, r)| r);
    for (b, e) in base.trace.iter().zip(kept) {
        prop_assert_eq!(&b.view.immediate, &e.view.immediate, "immediate differs at utterance {}", b.utterance_index);
        prop_assert_eq!(&b.view.retrievable, &e.view.retrievable);
        let lost: BTreeSet<ItemId> = e.view.lost.difference(&fresh_ids).cloned().collect();
        prop_assert_eq!(&b.view.lost, &lost, "lost differs at utterance {}", b.utterance_index);
        prop_assert_eq!(&b.resolutions, &e.resolutions);
    }
    Ok(())
}

/// Parsing the writer's output gives back the same transcript, and writing
/// is a fixed point after one round.
pub fn check_round_trip(script: &Script) -> Result<(), TestCaseError> {
    let t = script.transcript();
    let written = write_transcript(&t);
    let again = parse(&written).map_err(|e| fail(format!("{e}\n{written}")))?;
    prop_assert_eq!(&again, &t);
    prop_assert_eq!(write_transcript(&again), written);
    Ok(())
}

/// Two runs over the same input produce byte-identical traces and reports.
pub fn check_determinism(script: &Script, capacity: Capacity) -> Result<(), TestCaseError> {
    let t = script.transcript();
    for model in [ModelKind::Stack, ModelKind::Cache] {
        let a = simulate(&t, model, capacity, NonZeroU64::MIN).map_err(|e| fail(e.to_string()))?;
        let b = simulate(&t, model, capacity, NonZeroU64::MIN).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(write_trace(&a.trace), write_trace(&b.trace));
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
    Ok(())
}

/// Whenever the stack resolves a pronoun to an item outside the top space,
/// no entity in the top space may agree with the mention. Returns how many
/// such resolutions were checked.
pub fn check_stacked_focus_constraint(t: &Transcript) -> Result<usize, String> {
    let mut checked = 0;
    let mut stack = FocusStack::new();
    for utt in &t.utterances {
        for ev in t.events_before(utt.index) {
            stack.apply_event(ev).map_err(|e| e.to_string())?;
        }
        stack.apply_utterance(utt);
        for mention in utt.mentions.iter().filter(|m| m.form != MentionForm::VPEllipsis) {
            let r = resolve(mention, &stack.view(), &t.items, RetrievalMode::Forbidden);
            let Some(item) = r.outcome.item() else { continue };
            if stack.top().items.contains(item) {
                continue;
            }
            checked += 1;
            let top: Vec<_> =
                stack.top().items.iter().map(|i| &t.items[i]).filter(|i| i.kind == ItemKind::Entity).collect();
            if let Some(rival) = agreement_filter(&top, mention).first() {
                return Err(format!("{} resolved below the top space past `{}`", mention.id, rival.id));
            }
        }
    }
    Ok(checked)
}
