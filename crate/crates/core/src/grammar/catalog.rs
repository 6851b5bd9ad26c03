//! The fixed template catalog.
//!
//! Templates are written with composite `@action` and `@event` clauses and
//! expanded at construction into flat patterns, one per clause variant.

use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use crate::model::{ActionKind, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum IntentKind {
    DirectAction,
    DelayedAction,
    ConfirmThingChoice,
    Repeating,
    Event,
    WhyDidSomethingHappen,
    RulesDefined,
    RulesDefinedChangeSingleRule,
    CancelCommand,
    ConfirmCancel,
    WhatCanYouDo,
}

impl IntentKind {
    pub const ALL: [IntentKind; 11] = [
        IntentKind::DirectAction,
        IntentKind::DelayedAction,
        IntentKind::ConfirmThingChoice,
        IntentKind::Repeating,
        IntentKind::Event,
        IntentKind::WhyDidSomethingHappen,
        IntentKind::RulesDefined,
        IntentKind::RulesDefinedChangeSingleRule,
        IntentKind::CancelCommand,
        IntentKind::ConfirmCancel,
        IntentKind::WhatCanYouDo,
    ];

    /// Slots every intent of this kind carries.
    pub fn mandatory_slots(self) -> &'static [&'static str] {
        match self {
            IntentKind::DirectAction => &["action"],
            IntentKind::DelayedAction | IntentKind::Repeating => &["action", "time"],
            IntentKind::Event => &["action", "event"],
            IntentKind::ConfirmThingChoice => &["device"],
            IntentKind::RulesDefinedChangeSingleRule => &["time"],
            IntentKind::ConfirmCancel => &["answer"],
            _ => &[],
        }
    }
}

impl fmt::Display for IntentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Which entity a pattern element contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    None,
    Action,
    Event,
    Device,
    Time,
    Rule,
    Answer,
}

impl Group {
    pub fn slot_name(self) -> Option<&'static str> {
        match self {
            Group::None => None,
            Group::Action => Some("action"),
            Group::Event => Some("event"),
            Group::Device => Some("device"),
            Group::Time => Some("time"),
            Group::Rule => Some("rule"),
            Group::Answer => Some("answer"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Elem {
    Lit(&'static str),
    /// One or more words naming a device.
    Device,
    Time,
    /// A count and a unit: `5 minutes`, `an hour`.
    Duration,
    /// A number with an optional unit word.
    Scalar,
    /// A small positive integer (rule numbers).
    Number,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Piece {
    pub elem: Elem,
    pub group: Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventForm {
    BecameOn,
    BecameOff,
    Activated,
    Crossed(Direction),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeForm {
    At,
    In,
    Between,
    DailyAt,
    DailyBetween,
    /// Target time of a rule change.
    To,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
}

/// One flat pattern of the catalog.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Template {
    pub id: String,
    pub intent_kind: IntentKind,
    pub pattern: Vec<Piece>,
    /// Any one of these contexts must be active; empty means ungated.
    pub contexts: Vec<&'static str>,
    pub action: Option<ActionKind>,
    pub event: Option<EventForm>,
    pub time: Option<TimeForm>,
    pub answer: Option<Answer>,
}

impl Template {
    pub fn literal_count(&self) -> usize {
        self.pattern
            .iter()
            .filter(|p| matches!(p.elem, Elem::Lit(_)))
            .count()
    }

    pub fn slot_count(&self) -> usize {
        self.pattern.len() - self.literal_count()
    }

    /// `turn on @device in @duration`
    pub fn pattern_text(&self) -> String {
        self.pattern
            .iter()
            .map(|p| match &p.elem {
                Elem::Lit(w) => (*w).to_string(),
                Elem::Device => "@device".into(),
                Elem::Time => "@time".into(),
                Elem::Duration => "@duration".into(),
                Elem::Scalar => "@number".into(),
                Elem::Number => "@rule".into(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Words that can never be part of a device phrase.
pub const RESERVED: &[&str] = &[
    "when", "whenever", "if", "at", "in", "from", "to", "until", "till", "everyday", "every",
    "daily", "between", "and", "turn", "turns", "turned", "switch", "switches", "switched", "is",
    "was", "on", "off", "did", "why", "goes", "go", "rises", "drops", "falls", "above", "below",
    "exceeds", "enable", "disable", "set", "what", "cancel", "undo", "it", "day", "for", "rules",
    "rule", "change", "activated", "activates", "triggered", "gets", "get", "please", "then", "after",
];

const FILLERS: &[&str] = &["okay", "ok", "please", "hey", "so"];

pub fn is_filler(w: &str) -> bool {
    FILLERS.contains(&w)
}

// Short-hand pattern builder: words are literals, `@x` are slots.
fn pat(spec: &'static str, group: Group) -> Vec<Piece> {
    spec.split_whitespace()
        .map(|w| {
            let elem = match w {
                "@device" => Elem::Device,
                "@time" => Elem::Time,
                "@duration" => Elem::Duration,
                "@number" => Elem::Scalar,
                "@rule" => Elem::Number,
                lit => Elem::Lit(lit),
            };
            Piece { elem, group }
        })
        .collect()
}

struct Clause {
    name: &'static str,
    spec: &'static str,
    action: Option<ActionKind>,
    event: Option<EventForm>,
}

const fn act(name: &'static str, spec: &'static str, kind: ActionKind) -> Clause {
    Clause {
        name,
        spec,
        action: Some(kind),
        event: None,
    }
}

const fn evt(name: &'static str, spec: &'static str, form: EventForm) -> Clause {
    Clause {
        name,
        spec,
        action: None,
        event: Some(form),
    }
}

const ACTIONS: &[Clause] = &[
    act("turn-on", "turn on @device", ActionKind::TurnOn),
    act("turn-x-on", "turn @device on", ActionKind::TurnOn),
    act("switch-on", "switch on @device", ActionKind::TurnOn),
    act("switch-x-on", "switch @device on", ActionKind::TurnOn),
    act("enable", "enable @device", ActionKind::TurnOn),
    act("turn-off", "turn off @device", ActionKind::TurnOff),
    act("turn-x-off", "turn @device off", ActionKind::TurnOff),
    act("switch-off", "switch off @device", ActionKind::TurnOff),
    act("switch-x-off", "switch @device off", ActionKind::TurnOff),
    act("disable", "disable @device", ActionKind::TurnOff),
    act("set", "set @device to @number", ActionKind::SetValue),
];

const EVENTS: &[Clause] = &[
    evt("turns-on", "@device turns on", EventForm::BecameOn),
    evt("is-turned-on", "@device is turned on", EventForm::BecameOn),
    evt("goes-on", "@device goes on", EventForm::BecameOn),
    evt("switches-on", "@device switches on", EventForm::BecameOn),
    evt("turns-off", "@device turns off", EventForm::BecameOff),
    evt("is-turned-off", "@device is turned off", EventForm::BecameOff),
    evt("goes-off", "@device goes off", EventForm::BecameOff),
    evt("switches-off", "@device switches off", EventForm::BecameOff),
    evt("is-activated", "@device is activated", EventForm::Activated),
    evt("activates", "@device activates", EventForm::Activated),
    evt("is-triggered", "@device is triggered", EventForm::Activated),
    evt("goes-above", "@device goes above @number", EventForm::Crossed(Direction::Up)),
    evt("rises-above", "@device rises above @number", EventForm::Crossed(Direction::Up)),
    evt("exceeds", "@device exceeds @number", EventForm::Crossed(Direction::Up)),
    evt("goes-below", "@device goes below @number", EventForm::Crossed(Direction::Down)),
    evt("drops-below", "@device drops below @number", EventForm::Crossed(Direction::Down)),
    evt("falls-below", "@device falls below @number", EventForm::Crossed(Direction::Down)),
];

// Past-tense forms for "why did ..." questions.
const WHY_EVENTS: &[Clause] = &[
    evt("did-turn-on", "did @device turn on", EventForm::BecameOn),
    evt("did-switch-on", "did @device switch on", EventForm::BecameOn),
    evt("did-go-on", "did @device go on", EventForm::BecameOn),
    evt("is-on", "is @device on", EventForm::BecameOn),
    evt("was-turned-on", "was @device turned on", EventForm::BecameOn),
    evt("did-turn-off", "did @device turn off", EventForm::BecameOff),
    evt("did-switch-off", "did @device switch off", EventForm::BecameOff),
    evt("did-go-off", "did @device go off", EventForm::BecameOff),
    evt("is-off", "is @device off", EventForm::BecameOff),
    evt("was-turned-off", "was @device turned off", EventForm::BecameOff),
    evt("did-get-activated", "did @device get activated", EventForm::Activated),
    evt("was-activated", "was @device activated", EventForm::Activated),
    evt("did-go-above", "did @device go above @number", EventForm::Crossed(Direction::Up)),
    evt("did-go-below", "did @device go below @number", EventForm::Crossed(Direction::Down)),
];

/// Shapes combining an action clause with a time phrase. `A` marks where the
/// action goes.
const TIMED: &[(IntentKind, TimeForm, &str, &str)] = &[
    (IntentKind::DelayedAction, TimeForm::In, "in", "A in @duration"),
    (IntentKind::DelayedAction, TimeForm::In, "in-first", "in @duration A"),
    (IntentKind::DelayedAction, TimeForm::In, "after", "A after @duration"),
    (IntentKind::DelayedAction, TimeForm::At, "at", "A at @time"),
    (IntentKind::DelayedAction, TimeForm::At, "at-first", "at @time A"),
    (IntentKind::DelayedAction, TimeForm::Between, "from", "A from @time to @time"),
    (IntentKind::DelayedAction, TimeForm::Between, "from-until", "A from @time until @time"),
    (IntentKind::DelayedAction, TimeForm::Between, "between", "A between @time and @time"),
    (IntentKind::DelayedAction, TimeForm::Between, "from-first", "from @time to @time A"),
    (IntentKind::Repeating, TimeForm::DailyAt, "everyday-at", "A everyday at @time"),
    (IntentKind::Repeating, TimeForm::DailyAt, "every-day-at", "A every day at @time"),
    (IntentKind::Repeating, TimeForm::DailyAt, "daily-at", "A daily at @time"),
    (IntentKind::Repeating, TimeForm::DailyAt, "at-everyday", "A at @time everyday"),
    (IntentKind::Repeating, TimeForm::DailyAt, "at-every-day", "A at @time every day"),
    (IntentKind::Repeating, TimeForm::DailyAt, "everyday-at-first", "everyday at @time A"),
    (IntentKind::Repeating, TimeForm::DailyAt, "every-day-at-first", "every day at @time A"),
    (IntentKind::Repeating, TimeForm::DailyBetween, "everyday-from", "A everyday from @time to @time"),
    (IntentKind::Repeating, TimeForm::DailyBetween, "every-day-from", "A every day from @time to @time"),
    (IntentKind::Repeating, TimeForm::DailyBetween, "daily-from", "A daily from @time to @time"),
    (IntentKind::Repeating, TimeForm::DailyBetween, "from-everyday", "A from @time to @time everyday"),
    (IntentKind::Repeating, TimeForm::DailyBetween, "from-every-day", "A from @time to @time every day"),
    (IntentKind::Repeating, TimeForm::DailyBetween, "everyday-between", "A everyday between @time and @time"),
];

/// Event-rule shapes; `A` is the action clause, `E` the event clause.
const RULES: &[(&str, &str)] = &[
    ("when", "A when E"),
    ("whenever", "A whenever E"),
    ("if", "A if E"),
    ("when-first", "when E A"),
    ("whenever-first", "whenever E A"),
    ("if-first", "if E A"),
];

struct Fixed {
    id: &'static str,
    kind: IntentKind,
    spec: &'static str,
    contexts: &'static [&'static str],
    time: Option<TimeForm>,
    answer: Option<Answer>,
}

const CHANGE_CTX: &[&str] = &["causal-chain", "rules-list"];

const fn fixed(id: &'static str, kind: IntentKind, spec: &'static str) -> Fixed {
    Fixed {
        id,
        kind,
        spec,
        contexts: &[],
        time: None,
        answer: None,
    }
}

const fn gated(
    id: &'static str,
    kind: IntentKind,
    spec: &'static str,
    contexts: &'static [&'static str],
) -> Fixed {
    Fixed {
        id,
        kind,
        spec,
        contexts,
        time: None,
        answer: None,
    }
}

const fn change(id: &'static str, spec: &'static str) -> Fixed {
    Fixed {
        id,
        kind: IntentKind::RulesDefinedChangeSingleRule,
        spec,
        contexts: CHANGE_CTX,
        time: Some(TimeForm::To),
        answer: None,
    }
}

const fn answer(id: &'static str, spec: &'static str, a: Answer) -> Fixed {
    Fixed {
        id,
        kind: IntentKind::ConfirmCancel,
        spec,
        contexts: &["cancel-pending"],
        time: None,
        answer: Some(a),
    }
}

const FIXED: &[Fixed] = &[
    fixed("rules/are-defined-for", IntentKind::RulesDefined, "what rules are defined for @device"),
    fixed("rules/do-i-have-defined-for", IntentKind::RulesDefined, "what rules do i have defined for @device"),
    fixed("rules/do-i-have-for", IntentKind::RulesDefined, "what rules do i have for @device"),
    fixed("rules/are-there-for", IntentKind::RulesDefined, "what rules are there for @device"),
    fixed("rules/are-the-rules-for", IntentKind::RulesDefined, "what are the rules for @device"),
    fixed("rules/list-for", IntentKind::RulesDefined, "list the rules for @device"),
    fixed("rules/show-for", IntentKind::RulesDefined, "show the rules for @device"),
    fixed("rules/are-defined", IntentKind::RulesDefined, "what rules are defined"),
    fixed("rules/do-i-have", IntentKind::RulesDefined, "what rules do i have"),
    change("change/it-to", "change it to @time"),
    change("change/that-to", "change that to @time"),
    change("change/the-rule-to", "change the rule to @time"),
    change("change/the-time-to", "change the time to @time"),
    change("change/move-it-to", "move it to @time"),
    change("change/make-it", "make it @time"),
    change("change/rule-n-to", "change rule @rule to @time"),
    fixed("cancel/last-command", IntentKind::CancelCommand, "cancel last command"),
    fixed("cancel/the-last-command", IntentKind::CancelCommand, "cancel the last command"),
    fixed("cancel/my-last-command", IntentKind::CancelCommand, "cancel my last command"),
    fixed("cancel/that", IntentKind::CancelCommand, "cancel that"),
    fixed("cancel/undo", IntentKind::CancelCommand, "undo"),
    fixed("cancel/undo-that", IntentKind::CancelCommand, "undo that"),
    fixed("cancel/undo-last-command", IntentKind::CancelCommand, "undo last command"),
    fixed("cancel/undo-the-last-command", IntentKind::CancelCommand, "undo the last command"),
    fixed("cancel/undo-my-last-command", IntentKind::CancelCommand, "undo my last command"),
    answer("confirm/yes", "yes", Answer::Yes),
    answer("confirm/yeah", "yeah", Answer::Yes),
    answer("confirm/yep", "yep", Answer::Yes),
    answer("confirm/sure", "sure", Answer::Yes),
    answer("confirm/do-it", "do it", Answer::Yes),
    answer("confirm/yes-cancel-it", "yes cancel it", Answer::Yes),
    answer("confirm/no", "no", Answer::No),
    answer("confirm/nope", "nope", Answer::No),
    answer("confirm/never-mind", "never mind", Answer::No),
    answer("confirm/dont", "dont", Answer::No),
    answer("confirm/keep-it", "keep it", Answer::No),
    gated("choice/device", IntentKind::ConfirmThingChoice, "@device", &["device-choice"]),
    gated("choice/i-mean", IntentKind::ConfirmThingChoice, "i mean @device", &["device-choice"]),
    gated("choice/i-meant", IntentKind::ConfirmThingChoice, "i meant @device", &["device-choice"]),
    gated("choice/the-one", IntentKind::ConfirmThingChoice, "@device one", &["device-choice"]),
    gated("why/tell-me-more", IntentKind::WhyDidSomethingHappen, "tell me more", &["causal-chain"]),
    gated("why/and-before-that", IntentKind::WhyDidSomethingHappen, "and before that", &["causal-chain"]),
    gated("why/why", IntentKind::WhyDidSomethingHappen, "why", &["causal-chain"]),
    fixed("help/what-can-you-do", IntentKind::WhatCanYouDo, "what can you do"),
    fixed("help/what-can-i-say", IntentKind::WhatCanYouDo, "what can i say"),
    fixed("help/help", IntentKind::WhatCanYouDo, "help"),
];

fn splice(shape: &'static str, parts: &[(&str, &Clause, Group)]) -> Vec<Piece> {
    let mut out = Vec::new();
    for w in shape.split_whitespace() {
        match parts.iter().find(|(marker, _, _)| *marker == w) {
            Some((_, clause, group)) => out.extend(pat(clause.spec, *group)),
            None if w.starts_with('@') => out.extend(pat(w, Group::Time)),
            None => out.extend(pat(w, Group::None)),
        }
    }
    out
}

fn build() -> Vec<Template> {
    let mut out = Vec::new();
    let blank = |id: String, kind, pattern| Template {
        id,
        intent_kind: kind,
        pattern,
        contexts: Vec::new(),
        action: None,
        event: None,
        time: None,
        answer: None,
    };
    for a in ACTIONS {
        let mut t = blank(
            format!("direct/{}", a.name),
            IntentKind::DirectAction,
            pat(a.spec, Group::Action),
        );
        t.action = a.action;
        out.push(t);
    }
    for (kind, form, name, shape) in TIMED {
        for a in ACTIONS {
            let family = if *kind == IntentKind::Repeating { "repeat" } else { "delayed" };
            let mut t = blank(
                format!("{family}/{name}:{}", a.name),
                *kind,
                splice(shape, &[("A", a, Group::Action)]),
            );
            t.action = a.action;
            t.time = Some(*form);
            out.push(t);
        }
    }
    for (name, shape) in RULES {
        for a in ACTIONS {
            for e in EVENTS {
                let mut t = blank(
                    format!("event/{name}:{}:{}", a.name, e.name),
                    IntentKind::Event,
                    splice(shape, &[("A", a, Group::Action), ("E", e, Group::Event)]),
                );
                t.action = a.action;
                t.event = e.event;
                out.push(t);
            }
        }
    }
    for e in WHY_EVENTS {
        let mut pattern = pat("why", Group::None);
        pattern.extend(pat(e.spec, Group::Event));
        let mut t = blank(
            format!("why/{}", e.name),
            IntentKind::WhyDidSomethingHappen,
            pattern,
        );
        t.event = e.event;
        out.push(t);
    }
    for f in FIXED {
        let group = match f.kind {
            IntentKind::ConfirmThingChoice | IntentKind::RulesDefined => Group::Device,
            _ => Group::None,
        };
        let mut pattern = pat(f.spec, group);
        for p in &mut pattern {
            match p.elem {
                Elem::Time => p.group = Group::Time,
                Elem::Number => p.group = Group::Rule,
                Elem::Lit(_) if f.answer.is_some() => p.group = Group::Answer,
                Elem::Lit(_) => p.group = Group::None,
                _ => {}
            }
        }
        let mut t = blank(f.id.to_string(), f.kind, pattern);
        t.contexts = f.contexts.to_vec();
        t.time = f.time;
        t.answer = f.answer;
        out.push(t);
    }
    out
}

/// The full catalog, in tie-break order.
pub fn template_catalog() -> &'static [Template] {
    static CATALOG: OnceLock<Vec<Template>> = OnceLock::new();
    CATALOG.get_or_init(build)
}

/// Human-readable listing of every supported phrasing.
pub fn dump() -> String {
    let mut out = String::new();
    for kind in IntentKind::ALL {
        out.push_str(&format!("{kind}\n"));
        for t in template_catalog().iter().filter(|t| t.intent_kind == kind) {
            let gate = if t.contexts.is_empty() {
                String::new()
            } else {
                format!("    [needs {}]", t.contexts.join(" or "))
            };
            out.push_str(&format!("  {}{gate}\n", t.pattern_text()));
        }
    }
    out
}
