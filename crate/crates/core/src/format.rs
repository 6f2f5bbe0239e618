//! Line-oriented transcript format.
//!
//! ```text
//! DIALOGUE <id>
//! UTT <id> speaker=<name> [iru=<uttId>[,<uttId>...]]
//! ITEM <id> kind=entity|prop|surface [gender=m|f|n] [num=sg|pl] [pred=<lemma>]
//!      [args=<id>,...] [sel=<tag>,...] [realizes=<id>]
//! ITEM <id>                      # re-mention of an already declared item
//! PRON <id> gender=m|f|n num=sg|pl [verb=<lemma>] [sel=<tag>,...] gold=<itemId>
//! ELLIPSIS <id> gold=<itemId>
//! PUSH <segId> [expect-return]
//! POP <segId>
//! RETURN <segId>
//! CASE <id> mention=<pronId> [iru] [central-competitor]
//! ```
//!
//! `#` starts a comment and blank lines are ignored. ITEM, PRON and ELLIPSIS
//! attach to the most recent UTT; CASE attaches to the RETURN directly before
//! it. Parsing is strict: unknown records, keys and flags are errors.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::discourse::{
    DiscourseItem, Gender, ItemId, ItemKind, ItemTable, Mention, MentionForm, MentionId, Number, SegmentEvent,
    SegmentEventKind, SegmentId, UttId, Utterance,
};
use crate::transcript::{CaseAnnotation, Transcript};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line_number}: {message} (`{offending_text}`)")]
pub struct ParseError {
    pub line_number: usize,
    pub message: String,
    pub offending_text: String,
}

struct Line<'a> {
    number: usize,
    text: &'a str,
}

impl Line<'_> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError { line_number: self.number, message: message.into(), offending_text: self.text.to_owned() }
    }
}

/// `key=value` pairs and bare flags following a record's identifier.
struct Fields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
    flags: Vec<&'a str>,
}

impl<'a> Fields<'a> {
    fn parse(line: &Line<'_>, tokens: &[&'a str], keys: &[&str], flags: &[&str]) -> Result<Self, ParseError> {
        let mut out = Fields { pairs: Vec::new(), flags: Vec::new() };
        for tok in tokens {
            match tok.split_once('=') {
                Some((k, v)) => {
                    if !keys.contains(&k) {
                        return Err(line.err(format!("unknown key `{k}`")));
                    }
                    if v.is_empty() {
                        return Err(line.err(format!("empty value for key `{k}`")));
                    }
                    if out.pairs.iter().any(|(seen, _)| *seen == k) {
                        return Err(line.err(format!("duplicate key `{k}`")));
                    }
                    out.pairs.push((k, v));
                }
                None => {
                    if !flags.contains(tok) {
                        return Err(line.err(format!("malformed field `{tok}`, expected key=value")));
                    }
                    if out.flags.contains(tok) {
                        return Err(line.err(format!("duplicate flag `{tok}`")));
                    }
                    out.flags.push(tok);
                }
            }
        }
        Ok(out)
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        self.pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn require(&self, line: &Line<'_>, key: &str) -> Result<&'a str, ParseError> {
        self.get(key).ok_or_else(|| line.err(format!("missing required key `{key}`")))
    }

    fn has(&self, flag: &str) -> bool {
        self.flags.contains(&flag)
    }

    fn is_empty(&self) -> bool {
        self.pairs.is_empty() && self.flags.is_empty()
    }
}

fn list(v: &str) -> Vec<&str> {
    v.split(',').collect()
}

fn parse_gender(line: &Line<'_>, v: &str) -> Result<Gender, ParseError> {
    match v {
        "m" => Ok(Gender::Masc),
        "f" => Ok(Gender::Fem),
        "n" => Ok(Gender::Neut),
        _ => Err(line.err(format!("bad gender `{v}`, expected m|f|n"))),
    }
}

fn parse_number(line: &Line<'_>, v: &str) -> Result<Number, ParseError> {
    match v {
        "sg" => Ok(Number::Sg),
        "pl" => Ok(Number::Pl),
        _ => Err(line.err(format!("bad number `{v}`, expected sg|pl"))),
    }
}

fn sel_set(v: Option<&str>) -> BTreeSet<String> {
    v.map(|v| list(v).into_iter().map(str::to_owned).collect()).unwrap_or_default()
}

/// A reference checked once the whole file has been read.
struct Deferred {
    line_number: usize,
    text: String,
    what: &'static str,
    target: String,
}

#[derive(Default)]
struct Parser {
    dialogue_id: Option<String>,
    utterances: Vec<Utterance>,
    events: Vec<SegmentEvent>,
    items: ItemTable,
    cases: Vec<(usize, String, CaseAnnotation)>,
    deferred: Vec<Deferred>,
    open: Vec<SegmentId>,
    pushed: HashSet<SegmentId>,
    mention_ids: HashSet<MentionId>,
    case_ids: HashSet<String>,
    /// Event index of a RETURN that is the immediately preceding record.
    last_return: Option<usize>,
}

impl Parser {
    fn record(&mut self, line: &Line<'_>) -> Result<(), ParseError> {
        let tokens: Vec<&str> = line.text.split_whitespace().collect();
        let (head, rest) = tokens.split_first().expect("blank lines are skipped");
        if *head != "DIALOGUE" && self.dialogue_id.is_none() {
            return Err(line.err("first record must be DIALOGUE"));
        }
        let after_return = self.last_return.take();
        let (id, fields) = match rest.split_first() {
            Some((id, fields)) => (*id, fields),
            None => {
                return Err(match *head {
                    "DIALOGUE" | "UTT" | "ITEM" | "PRON" | "ELLIPSIS" | "PUSH" | "POP" | "RETURN" | "CASE" => {
                        line.err(format!("{head} record needs an identifier"))
                    }
                    _ => line.err(format!("unknown record type `{head}`")),
                })
            }
        };
        match *head {
            "DIALOGUE" => {
                if self.dialogue_id.is_some() {
                    return Err(line.err("duplicate DIALOGUE record"));
                }
                Fields::parse(line, fields, &[], &[])?;
                self.dialogue_id = Some(id.to_owned());
            }
            "UTT" => self.utt(line, id, fields)?,
            "ITEM" => self.item(line, id, fields)?,
            "PRON" => self.pron(line, id, fields)?,
            "ELLIPSIS" => self.ellipsis(line, id, fields)?,
            "PUSH" => {
                let f = Fields::parse(line, fields, &[], &["expect-return"])?;
                let seg = SegmentId::from(id);
                if !self.pushed.insert(seg.clone()) {
                    return Err(line.err(format!("segment `{id}` pushed twice")));
                }
                self.open.push(seg.clone());
                self.event(SegmentEventKind::Push, seg, f.has("expect-return"));
            }
            "POP" => {
                Fields::parse(line, fields, &[], &[])?;
                let seg = SegmentId::from(id);
                match self.open.last() {
                    Some(top) if *top == seg => {
                        self.open.pop();
                    }
                    Some(top) => {
                        return Err(line.err(format!("POP `{id}` does not match open segment `{top}`")));
                    }
                    None => return Err(line.err(format!("POP `{id}` with no open segment"))),
                }
                self.event(SegmentEventKind::Pop, seg, false);
            }
            "RETURN" => {
                Fields::parse(line, fields, &[], &[])?;
                let seg = SegmentId::from(id);
                let Some(pos) = self.open.iter().rposition(|s| *s == seg) else {
                    return Err(line.err(format!("RETURN to `{id}`, which is not an open segment")));
                };
                self.open.truncate(pos + 1);
                self.event(SegmentEventKind::Return, seg, false);
                self.last_return = Some(self.events.len() - 1);
            }
            "CASE" => {
                let f = Fields::parse(line, fields, &["mention"], &["iru", "central-competitor"])?;
                let Some(event_index) = after_return else {
                    return Err(line.err("CASE must directly follow a RETURN record"));
                };
                if !self.case_ids.insert(id.to_owned()) {
                    return Err(line.err(format!("duplicate case `{id}`")));
                }
                let case = CaseAnnotation {
                    id: id.to_owned(),
                    mention: MentionId::from(f.require(line, "mention")?),
                    iru: f.has("iru"),
                    central_competitor: f.has("central-competitor"),
                    event_index,
                };
                self.cases.push((line.number, line.text.to_owned(), case));
            }
            other => return Err(line.err(format!("unknown record type `{other}`"))),
        }
        Ok(())
    }

    fn event(&mut self, kind: SegmentEventKind, segment: SegmentId, expect_return: bool) {
        self.events.push(SegmentEvent { kind, segment, expect_return, position: self.utterances.len() });
    }

    fn current_utt(&mut self, line: &Line<'_>, what: &str) -> Result<&mut Utterance, ParseError> {
        self.utterances.last_mut().ok_or_else(|| line.err(format!("{what} record before any UTT")))
    }

    fn utt(&mut self, line: &Line<'_>, id: &str, fields: &[&str]) -> Result<(), ParseError> {
        let f = Fields::parse(line, fields, &["speaker", "iru"], &[])?;
        let uid = UttId::from(id);
        if self.utterances.iter().any(|u| u.id == uid) {
            return Err(line.err(format!("duplicate utterance `{id}`")));
        }
        let speaker = f.require(line, "speaker")?.to_owned();
        let mut iru_antecedents = Vec::new();
        if let Some(v) = f.get("iru") {
            for a in list(v) {
                let a = UttId::from(a);
                if !self.utterances.iter().any(|u| u.id == a) {
                    return Err(line.err(format!("IRU antecedent `{a}` is not an earlier utterance")));
                }
                iru_antecedents.push(a);
            }
        }
        self.utterances.push(Utterance {
            id: uid,
            speaker,
            index: self.utterances.len(),
            items: Vec::new(),
            mentions: Vec::new(),
            iru_antecedents,
        });
        Ok(())
    }

    fn item(&mut self, line: &Line<'_>, id: &str, fields: &[&str]) -> Result<(), ParseError> {
        let f = Fields::parse(line, fields, &["kind", "gender", "num", "pred", "args", "sel", "realizes"], &[])?;
        let iid = ItemId::from(id);
        let index = self.current_utt(line, "ITEM")?.index;
        let declared = self.items.contains_key(&iid);
        if declared && !f.is_empty() {
            return Err(line.err(format!("item `{id}` already declared; a re-mention takes no fields")));
        }
        if !declared {
            let kind = match f.require(line, "kind")? {
                "entity" => ItemKind::Entity,
                "prop" => ItemKind::Proposition,
                "surface" => ItemKind::SurfaceForm,
                other => return Err(line.err(format!("bad kind `{other}`, expected entity|prop|surface"))),
            };
            if kind != ItemKind::Proposition && (f.get("pred").is_some() || f.get("args").is_some()) {
                return Err(line.err("pred and args are only allowed on propositions"));
            }
            let realizes = match (kind, f.get("realizes")) {
                (ItemKind::SurfaceForm, Some(r)) => Some(ItemId::from(r)),
                (ItemKind::SurfaceForm, None) => return Err(line.err("surface item needs realizes=")),
                (_, Some(_)) => return Err(line.err("realizes is only allowed on surface items")),
                (_, None) => None,
            };
            let args: Vec<ItemId> =
                f.get("args").map(|v| list(v).into_iter().map(ItemId::from).collect()).unwrap_or_default();
            for target in args.iter().chain(realizes.iter()) {
                self.defer(line, "item reference", target.as_str());
            }
            let item = DiscourseItem {
                id: iid.clone(),
                kind,
                gender: f.get("gender").map(|v| parse_gender(line, v)).transpose()?.unwrap_or_default(),
                number: f.get("num").map(|v| parse_number(line, v)).transpose()?.unwrap_or_default(),
                predicate: f.get("pred").map(str::to_owned),
                args,
                sel_classes: sel_set(f.get("sel")),
                realizes,
                introduced_at: index,
            };
            self.items.insert(iid.clone(), item);
        }
        let utt = self.current_utt(line, "ITEM")?;
        if utt.items.contains(&iid) {
            return Err(line.err(format!("item `{id}` listed twice in utterance `{}`", utt.id)));
        }
        utt.items.push(iid);
        Ok(())
    }

    fn mention(&mut self, line: &Line<'_>, mention: Mention) -> Result<(), ParseError> {
        if !self.mention_ids.insert(mention.id.clone()) {
            return Err(line.err(format!("duplicate mention `{}`", mention.id)));
        }
        self.defer(line, "gold antecedent", mention.gold.as_str());
        self.current_utt(line, "mention")?.mentions.push(mention);
        Ok(())
    }

    fn pron(&mut self, line: &Line<'_>, id: &str, fields: &[&str]) -> Result<(), ParseError> {
        self.current_utt(line, "PRON")?;
        let f = Fields::parse(line, fields, &["gender", "num", "verb", "sel", "gold"], &[])?;
        let mention = Mention {
            id: MentionId::from(id),
            form: MentionForm::Pronoun,
            gender: parse_gender(line, f.require(line, "gender")?)?,
            number: parse_number(line, f.require(line, "num")?)?,
            verb_lemma: f.get("verb").map(str::to_owned),
            required_sel: sel_set(f.get("sel")),
            gold: ItemId::from(f.require(line, "gold")?),
        };
        self.mention(line, mention)
    }

    fn ellipsis(&mut self, line: &Line<'_>, id: &str, fields: &[&str]) -> Result<(), ParseError> {
        self.current_utt(line, "ELLIPSIS")?;
        let f = Fields::parse(line, fields, &["gold"], &[])?;
        let mention = Mention {
            id: MentionId::from(id),
            form: MentionForm::VPEllipsis,
            gender: Gender::Unspecified,
            number: Number::Unspecified,
            verb_lemma: None,
            required_sel: BTreeSet::new(),
            gold: ItemId::from(f.require(line, "gold")?),
        };
        self.mention(line, mention)
    }

    fn defer(&mut self, line: &Line<'_>, what: &'static str, target: &str) {
        self.deferred.push(Deferred {
            line_number: line.number,
            text: line.text.to_owned(),
            what,
            target: target.to_owned(),
        });
    }

    fn finish(mut self, last_line: usize) -> Result<Transcript, ParseError> {
        let Some(dialogue_id) = self.dialogue_id.take() else {
            return Err(ParseError {
                line_number: last_line.max(1),
                message: "missing DIALOGUE record".into(),
                offending_text: String::new(),
            });
        };
        for d in &self.deferred {
            if !self.items.contains_key(&ItemId::from(d.target.as_str())) {
                return Err(ParseError {
                    line_number: d.line_number,
                    message: format!("undeclared {} `{}`", d.what, d.target),
                    offending_text: d.text.clone(),
                });
            }
        }
        let mut transcript = Transcript {
            dialogue_id,
            utterances: self.utterances,
            events: self.events,
            items: self.items,
            cases: Vec::new(),
        };
        for (line_number, text, case) in self.cases {
            let position = transcript.events[case.event_index].position;
            match transcript.find_mention(&case.mention) {
                Some((utt, _)) if utt.index >= position => transcript.cases.push(case),
                found => {
                    let message = if found.is_some() {
                        format!("case mention `{}` precedes its RETURN", case.mention)
                    } else {
                        format!("undeclared case mention `{}`", case.mention)
                    };
                    return Err(ParseError { line_number, message, offending_text: text });
                }
            }
        }
        Transcript::derive_pred_tags(&mut transcript.items);
        Ok(transcript)
    }
}

/// Parses a transcript, returning the first offending line on failure.
pub fn parse(text: &str) -> Result<Transcript, ParseError> {
    let mut parser = Parser::default();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        last_line = i + 1;
        let body = raw.split_once('#').map_or(raw, |(b, _)| b).trim();
        if body.is_empty() {
            continue;
        }
        parser.record(&Line { number: i + 1, text: body })?;
    }
    parser.finish(last_line)
}

fn gender_code(g: Gender) -> Option<&'static str> {
    match g {
        Gender::Masc => Some("m"),
        Gender::Fem => Some("f"),
        Gender::Neut => Some("n"),
        Gender::Unspecified => None,
    }
}

fn number_code(n: Number) -> Option<&'static str> {
    match n {
        Number::Sg => Some("sg"),
        Number::Pl => Some("pl"),
        Number::Unspecified => None,
    }
}

fn join<I: IntoIterator<Item = S>, S: AsRef<str>>(it: I) -> String {
    it.into_iter().map(|s| s.as_ref().to_owned()).collect::<Vec<_>>().join(",")
}

fn write_events(out: &mut String, t: &Transcript, position: usize) {
    for (index, ev) in t.events.iter().enumerate().filter(|(_, e)| e.position == position) {
        let _ = match ev.kind {
            SegmentEventKind::Push if ev.expect_return => writeln!(out, "PUSH {} expect-return", ev.segment),
            SegmentEventKind::Push => writeln!(out, "PUSH {}", ev.segment),
            SegmentEventKind::Pop => writeln!(out, "POP {}", ev.segment),
            SegmentEventKind::Return => writeln!(out, "RETURN {}", ev.segment),
        };
        for case in t.cases.iter().filter(|c| c.event_index == index) {
            let _ = write!(out, "CASE {} mention={}", case.id, case.mention);
            if case.iru {
                out.push_str(" iru");
            }
            if case.central_competitor {
                out.push_str(" central-competitor");
            }
            out.push('\n');
        }
    }
}

/// Serializes a transcript back into the line format.
///
/// Derived `pred:` tags are written out explicitly; parsing them again is
/// idempotent. Definite NP mentions have no record type of their own and are
/// written as PRON.
pub fn write_transcript(t: &Transcript) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "DIALOGUE {}", t.dialogue_id);
    for utt in &t.utterances {
        write_events(&mut out, t, utt.index);
        let _ = write!(out, "UTT {} speaker={}", utt.id, utt.speaker);
        if utt.is_iru() {
            let _ = write!(out, " iru={}", join(utt.iru_antecedents.iter().map(|u| u.as_str())));
        }
        out.push('\n');
        for id in &utt.items {
            let item = &t.items[id];
            if item.introduced_at != utt.index {
                let _ = writeln!(out, "ITEM {id}");
                continue;
            }
            let kind = match item.kind {
                ItemKind::Entity => "entity",
                ItemKind::Proposition => "prop",
                ItemKind::SurfaceForm => "surface",
            };
            let _ = write!(out, "ITEM {id} kind={kind}");
            if let Some(g) = gender_code(item.gender) {
                let _ = write!(out, " gender={g}");
            }
            if let Some(n) = number_code(item.number) {
                let _ = write!(out, " num={n}");
            }
            if let Some(p) = &item.predicate {
                let _ = write!(out, " pred={p}");
            }
            if !item.args.is_empty() {
                let _ = write!(out, " args={}", join(item.args.iter().map(|a| a.as_str())));
            }
            if !item.sel_classes.is_empty() {
                let _ = write!(out, " sel={}", join(&item.sel_classes));
            }
            if let Some(r) = &item.realizes {
                let _ = write!(out, " realizes={r}");
            }
            out.push('\n');
        }
        for m in &utt.mentions {
            if m.form == MentionForm::VPEllipsis {
                let _ = writeln!(out, "ELLIPSIS {} gold={}", m.id, m.gold);
                continue;
            }
            let _ = write!(out, "PRON {}", m.id);
            if let Some(g) = gender_code(m.gender) {
                let _ = write!(out, " gender={g}");
            }
            if let Some(n) = number_code(m.number) {
                let _ = write!(out, " num={n}");
            }
            if let Some(v) = &m.verb_lemma {
                let _ = write!(out, " verb={v}");
            }
            if !m.required_sel.is_empty() {
                let _ = write!(out, " sel={}", join(&m.required_sel));
            }
            let _ = writeln!(out, " gold={}", m.gold);
        }
    }
    write_events(&mut out, t, t.utterances.len());
    out
}
