//! Deterministic intent grammar: utterance tokens are matched against a fixed
//! template catalog and slot substrings are resolved against the registry.

mod catalog;
mod token;

pub use catalog::{
    dump, is_filler, template_catalog, Answer, Elem, EventForm, Group, IntentKind, Piece,
    Template, TimeForm, RESERVED,
};
pub use token::{tokenize, tokenize_spanned, Spanned, Token};

use std::collections::BTreeMap;
use std::ops::Range;

use chrono::NaiveTime;
use serde::Serialize;

use crate::model::{
    match_device, normalize_name, ActionKind, MatchResult, Predicate, Registry, Scalar,
};

/// A device phrase as the user said it plus its registry resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceRef {
    pub phrase: String,
    #[serde(skip)]
    pub matched: MatchResult,
}

/// A time phrase before it is anchored to the clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeExpr {
    At(NaiveTime),
    In(u64),
    Between(NaiveTime, NaiveTime),
    DailyAt(NaiveTime),
    DailyBetween(NaiveTime, NaiveTime),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolved {
    Action {
        kind: ActionKind,
        argument: Option<Scalar>,
        device: DeviceRef,
    },
    Event {
        predicate: Predicate,
        device: DeviceRef,
    },
    Time(TimeExpr),
    Device(DeviceRef),
    Rule(u32),
    Answer(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityRef {
    pub entity_name: String,
    pub raw_span: String,
    /// Byte range of `raw_span` in the utterance.
    pub span: Range<usize>,
    pub resolved: Resolved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intent {
    pub kind: IntentKind,
    pub slots: BTreeMap<String, EntityRef>,
    pub matched_template: String,
    pub utterance: String,
}

impl Intent {
    pub fn slot(&self, name: &str) -> Option<&Resolved> {
        self.slots.get(name).map(|e| &e.resolved)
    }

    pub fn time(&self) -> Option<TimeExpr> {
        match self.slot("time") {
            Some(Resolved::Time(t)) => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseResult {
    Intent(Intent),
    NoMatch {
        reason: String,
        /// Template sharing the most literal words with the utterance.
        nearest: Option<String>,
    },
}

impl ParseResult {
    pub fn intent(&self) -> Option<&Intent> {
        match self {
            ParseResult::Intent(i) => Some(i),
            ParseResult::NoMatch { .. } => None,
        }
    }
}

const DURATION_UNITS: &[(&str, u64)] = &[
    ("second", 1),
    ("seconds", 1),
    ("sec", 1),
    ("secs", 1),
    ("minute", 60),
    ("minutes", 60),
    ("min", 60),
    ("mins", 60),
    ("hour", 3600),
    ("hours", 3600),
    ("hr", 3600),
    ("hrs", 3600),
];

const ARTICLES: &[&str] = &["the", "a", "an"];

const SCALAR_UNITS: &[&str] = &["degrees", "degree", "percent", "celsius", "c"];

// Token index ranges captured for each piece of the pattern.
type Captures = Vec<Range<usize>>;

fn device_word(t: &Token, first: bool) -> bool {
    match t {
        Token::Word(w) => !RESERVED.contains(&w.as_str()),
        Token::Num(_) => !first,
        Token::Time(_) => false,
    }
}

fn phrase_of(tokens: &[Spanned]) -> String {
    tokens
        .iter()
        .map(|t| match &t.token {
            Token::Word(w) => w.clone(),
            Token::Num(n) => Scalar::new(*n, "").to_string(),
            Token::Time(t) => t.format("%H:%M").to_string(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lengths (in tokens) an element can consume at `at`, most preferred first.
fn candidate_lengths(elem: &Elem, toks: &[Spanned], at: usize) -> Vec<usize> {
    let rest = &toks[at..];
    match elem {
        Elem::Lit(w) => match rest.first() {
            Some(t) if t.token.is_word(w) => vec![1],
            _ => vec![],
        },
        Elem::Device => {
            let n = rest
                .iter()
                .enumerate()
                .take_while(|(i, t)| device_word(&t.token, *i == 0))
                .count();
            (1..=n)
                .filter(|len| normalize_name(&phrase_of(&rest[..*len])).is_ok())
                .collect()
        }
        Elem::Time => match rest.first().map(|t| &t.token) {
            Some(Token::Time(_)) => vec![1],
            Some(Token::Num(n)) if n.fract() == 0.0 && (0.0..24.0).contains(n) => vec![1],
            Some(Token::Word(w)) if w == "noon" || w == "midnight" => vec![1],
            _ => vec![],
        },
        Elem::Duration => {
            let count = matches!(
                rest.first().map(|t| &t.token),
                Some(Token::Num(n)) if *n > 0.0
            ) || rest.first().is_some_and(|t| t.token.is_word("a") || t.token.is_word("an"));
            let unit = rest.get(1).and_then(|t| t.token.word()).is_some_and(|w| {
                DURATION_UNITS.iter().any(|(u, _)| *u == w)
            });
            if count && unit {
                vec![2]
            } else {
                vec![]
            }
        }
        Elem::Scalar => match rest.first().map(|t| &t.token) {
            Some(Token::Num(_)) => {
                let unit = rest
                    .get(1)
                    .and_then(|t| t.token.word())
                    .is_some_and(|w| SCALAR_UNITS.contains(&w));
                if unit {
                    vec![2, 1]
                } else {
                    vec![1]
                }
            }
            _ => vec![],
        },
        Elem::Number => match rest.first().map(|t| &t.token) {
            Some(Token::Num(n)) if n.fract() == 0.0 && *n >= 1.0 => vec![1],
            _ => vec![],
        },
    }
}

fn match_from(pattern: &[Piece], toks: &[Spanned], pi: usize, ti: usize, caps: &mut Captures) -> bool {
    if pi == pattern.len() {
        return ti == toks.len();
    }
    if ti == toks.len() {
        return false;
    }
    for len in candidate_lengths(&pattern[pi].elem, toks, ti) {
        caps.push(ti..ti + len);
        if match_from(pattern, toks, pi + 1, ti + len, caps) {
            return true;
        }
        caps.pop();
    }
    false
}

fn match_template(t: &Template, toks: &[Spanned]) -> Option<Captures> {
    let mut caps = Vec::with_capacity(t.pattern.len());
    match_from(&t.pattern, toks, 0, 0, &mut caps).then_some(caps)
}

fn time_value(tok: &Token) -> NaiveTime {
    match tok {
        Token::Time(t) => *t,
        Token::Num(n) => NaiveTime::from_hms_opt(*n as u32, 0, 0).expect("checked range"),
        Token::Word(w) if w == "midnight" => NaiveTime::MIN,
        _ => NaiveTime::from_hms_opt(12, 0, 0).expect("noon"),
    }
}

fn duration_value(toks: &[Spanned]) -> u64 {
    let count = match &toks[0].token {
        Token::Num(n) => *n,
        _ => 1.0,
    };
    let unit = toks[1].token.word().unwrap_or_default();
    let per = DURATION_UNITS
        .iter()
        .find(|(u, _)| *u == unit)
        .map_or(60, |(_, s)| *s);
    (count * per as f64).round() as u64
}

fn scalar_value(toks: &[Spanned]) -> Scalar {
    let value = match &toks[0].token {
        Token::Num(n) => *n,
        _ => 0.0,
    };
    let unit = match toks.get(1).and_then(|t| t.token.word()) {
        Some("degrees" | "degree" | "celsius" | "c") => "C",
        Some("percent") => "%",
        _ => "",
    };
    Scalar::new(value, unit)
}

struct Bound<'a> {
    template: &'a Template,
    toks: &'a [Spanned],
    caps: Captures,
}

impl Bound<'_> {
    fn slice(&self, range: &Range<usize>) -> &[Spanned] {
        &self.toks[range.clone()]
    }

    fn of(&self, group: Group, elem: fn(&Elem) -> bool) -> Vec<&[Spanned]> {
        self.template
            .pattern
            .iter()
            .zip(&self.caps)
            .filter(|(p, _)| p.group == group && elem(&p.elem))
            .map(|(_, r)| self.slice(r))
            .collect()
    }

    fn span(&self, group: Group) -> Option<Range<usize>> {
        let ranges: Vec<&Range<usize>> = self
            .template
            .pattern
            .iter()
            .zip(&self.caps)
            .filter(|(p, _)| p.group == group)
            .map(|(_, r)| r)
            .collect();
        let first = ranges.iter().map(|r| r.start).min()?;
        let last = ranges.iter().map(|r| r.end).max()?;
        Some(self.toks[first].span.start..self.toks[last - 1].span.end)
    }

    fn device(&self, group: Group, registry: &Registry) -> Option<DeviceRef> {
        let toks = *self.of(group, |e| *e == Elem::Device).first()?;
        let phrase = phrase_of(toks);
        Some(DeviceRef {
            matched: match_device(&phrase, registry),
            phrase,
        })
    }

    fn scalar(&self, group: Group) -> Option<Scalar> {
        self.of(group, |e| *e == Elem::Scalar)
            .first()
            .map(|t| scalar_value(t))
    }

    fn resolve(&self, group: Group, registry: &Registry) -> Option<Resolved> {
        let t = self.template;
        Some(match group {
            Group::None => return None,
            Group::Action => Resolved::Action {
                kind: t.action?,
                argument: self.scalar(Group::Action),
                device: self.device(Group::Action, registry)?,
            },
            Group::Event => {
                let predicate = match t.event? {
                    EventForm::BecameOn => Predicate::BecameOn,
                    EventForm::BecameOff => Predicate::BecameOff,
                    EventForm::Activated => Predicate::Activated,
                    EventForm::Crossed(direction) => Predicate::CrossedThreshold {
                        direction,
                        threshold: self.scalar(Group::Event)?.value,
                    },
                };
                Resolved::Event {
                    predicate,
                    device: self.device(Group::Event, registry)?,
                }
            }
            Group::Device => Resolved::Device(self.device(Group::Device, registry)?),
            Group::Time => {
                let times: Vec<NaiveTime> = self
                    .of(Group::Time, |e| *e == Elem::Time)
                    .iter()
                    .map(|t| time_value(&t[0].token))
                    .collect();
                let expr = match t.time? {
                    TimeForm::In => TimeExpr::In(duration_value(
                        self.of(Group::Time, |e| *e == Elem::Duration).first()?,
                    )),
                    TimeForm::At | TimeForm::To => TimeExpr::At(*times.first()?),
                    TimeForm::Between => TimeExpr::Between(*times.first()?, *times.get(1)?),
                    TimeForm::DailyAt => TimeExpr::DailyAt(*times.first()?),
                    TimeForm::DailyBetween => {
                        TimeExpr::DailyBetween(*times.first()?, *times.get(1)?)
                    }
                };
                Resolved::Time(expr)
            }
            Group::Rule => {
                let toks = *self.of(Group::Rule, |e| *e == Elem::Number).first()?;
                match toks[0].token {
                    Token::Num(n) => Resolved::Rule(n as u32),
                    _ => return None,
                }
            }
            Group::Answer => Resolved::Answer(t.answer? == Answer::Yes),
        })
    }
}

fn build_intent(b: &Bound<'_>, utterance: &str, registry: &Registry) -> Intent {
    let mut slots = BTreeMap::new();
    let groups = [
        Group::Action,
        Group::Event,
        Group::Device,
        Group::Time,
        Group::Rule,
        Group::Answer,
    ];
    for g in groups {
        let (Some(name), Some(span)) = (g.slot_name(), b.span(g)) else {
            continue;
        };
        if let Some(resolved) = b.resolve(g, registry) {
            slots.insert(
                name.to_string(),
                EntityRef {
                    entity_name: name.to_string(),
                    raw_span: utterance[span.clone()].to_string(),
                    span,
                    resolved,
                },
            );
        }
    }
    // A single device inside an action or event clause is also exposed on
    // its own.
    let devices: Vec<(usize, &Piece)> = b
        .template
        .pattern
        .iter()
        .enumerate()
        .filter(|(_, p)| p.elem == Elem::Device)
        .collect();
    if let [(i, p)] = devices.as_slice() {
        if p.group != Group::Device {
            if let Some(device) = b.device(p.group, registry) {
                let r = &b.caps[*i];
                let span = b.toks[r.start].span.start..b.toks[r.end - 1].span.end;
                slots.insert(
                    "device".into(),
                    EntityRef {
                        entity_name: "device".into(),
                        raw_span: utterance[span.clone()].to_string(),
                        span,
                        resolved: Resolved::Device(device),
                    },
                );
            }
        }
    }
    Intent {
        kind: b.template.intent_kind,
        slots,
        matched_template: b.template.id.clone(),
        utterance: utterance.to_string(),
    }
}

fn gate_open(t: &Template, contexts: &[&str]) -> bool {
    t.contexts.is_empty() || t.contexts.iter().any(|c| contexts.contains(c))
}

fn best_match<'a>(toks: &'a [Spanned], contexts: &[&str]) -> Option<Bound<'a>> {
    let mut best: Option<(usize, usize, Bound<'a>)> = None;
    for t in template_catalog() {
        if !gate_open(t, contexts) {
            continue;
        }
        let Some(caps) = match_template(t, toks) else {
            continue;
        };
        let (lits, slots) = (t.literal_count(), t.slot_count());
        let better = match &best {
            None => true,
            Some((bl, bs, _)) => lits > *bl || (lits == *bl && slots < *bs),
        };
        if better {
            best = Some((lits, slots, Bound { template: t, toks, caps }));
        }
    }
    best.map(|(_, _, b)| b)
}

fn nearest_miss(toks: &[Spanned], contexts: &[&str]) -> Option<String> {
    let words: Vec<&str> = toks.iter().filter_map(|t| t.token.word()).collect();
    let mut best: Option<(usize, &Template)> = None;
    for t in template_catalog().iter().filter(|t| gate_open(t, contexts)) {
        let shared = t
            .pattern
            .iter()
            .filter(|p| {
                matches!(p.elem, Elem::Lit(w) if !ARTICLES.contains(&w) && words.contains(&w))
            })
            .count();
        if shared > 0 && best.is_none_or(|(s, _)| shared > s) {
            best = Some((shared, t));
        }
    }
    best.map(|(_, t)| t.id.clone())
}

/// Parses one utterance. Only templates whose gating context is listed in
/// `contexts` are considered.
pub fn parse(utterance: &str, registry: &Registry, contexts: &[&str]) -> ParseResult {
    let toks = tokenize_spanned(utterance);
    if toks.is_empty() {
        return ParseResult::NoMatch {
            reason: "empty utterance".into(),
            nearest: None,
        };
    }
    if let Some(b) = best_match(&toks, contexts) {
        return ParseResult::Intent(build_intent(&b, utterance, registry));
    }
    // Retry without politeness fillers at either end.
    let start = toks
        .iter()
        .take_while(|t| t.token.word().is_some_and(is_filler))
        .count();
    let end = toks.len()
        - toks[start..]
            .iter()
            .rev()
            .take_while(|t| t.token.word().is_some_and(is_filler))
            .count();
    if (start > 0 || end < toks.len()) && start < end {
        if let Some(b) = best_match(&toks[start..end], contexts) {
            return ParseResult::Intent(build_intent(&b, utterance, registry));
        }
    }
    ParseResult::NoMatch {
        reason: "no template matches".into(),
        nearest: nearest_miss(&toks, contexts),
    }
}

/// Fills a template's slots with sample values. Device slots take names from
/// `devices` in order.
pub fn instantiate(t: &Template, devices: &[&str]) -> String {
    let mut next_device = devices.iter().cycle();
    let mut times = ["8 am", "9 pm"].iter().cycle();
    t.pattern
        .iter()
        .map(|p| match &p.elem {
            Elem::Lit(w) => (*w).to_string(),
            Elem::Device => next_device.next().copied().unwrap_or("light").to_string(),
            Elem::Time => (*times.next().expect("cycle")).to_string(),
            Elem::Duration => "5 minutes".into(),
            Elem::Scalar => "21".into(),
            Elem::Number => "1".into(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}
