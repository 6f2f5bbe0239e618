//! Attentional-state simulator for discourse.
//!
//! Two models of what a conversant can attend to are replayed over annotated
//! dialogue transcripts: a focus-space stack, where accessibility follows the
//! segment hierarchy, and a bounded cache over main memory, where it follows
//! use and is limited by capacity. Anaphors are resolved against each model's
//! [`AccessibilityView`] and the differences are reported.

pub mod cache;
pub mod discourse;
pub mod format;
pub mod pops;
pub mod resolution;
pub mod sim;
pub mod stack;
pub mod trace;
pub mod transcript;

pub use cache::{CacheState, Capacity, DEFAULT_CAPACITY};
pub use discourse::{AccessibilityView, DiscourseItem, ItemId, Mention, ModelKind, SegmentEvent, Utterance};
pub use format::{parse, write_transcript, ParseError};
pub use pops::{classify_corpus, classify_return_pop, PopClassification, PopsReport, ReturnPopCase};
pub use resolution::{analyze_iru, resolve, IruFunction, Outcome, Resolution, RetrievalMode};
pub use sim::{compare, replay, run, simulate, DivergenceReport, RunConfig, SimError, SimulationReport};
pub use stack::FocusStack;
pub use trace::{read_trace, write_trace, StoreEvent, TraceRecord};
pub use transcript::Transcript;
