//! Multi-turn conversation state on top of the grammar.
//!
//! A turn parses the utterance with the session's active contexts, decides a
//! reply and optionally an [`EngineRequest`]. The caller executes the request
//! and folds its outcome into the reply with [`fold`].

pub mod render;

use std::collections::BTreeMap;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::causality::{resolve_why, LogEntry};
use crate::engine::describe::{action_phrase, condition_phrase, describe, format_duration};
use crate::engine::{Command, CommandDraft, Engine, EngineError};
use crate::grammar::{self, DeviceRef, Intent, IntentKind, ParseResult, Resolved, TimeExpr};
use crate::model::{
    format_time_long, next_occurrence, normalize_name, Action, ActionKind, CommandId,
    CommandKind, Condition, DeviceId, MatchResult, Registry, TimeSpec, Timestamp,
};

use render::*;

pub const CONTEXT_TTL: u32 = 2;

pub const DEVICE_CHOICE: &str = "device-choice";
pub const CAUSAL_CHAIN: &str = "causal-chain";
pub const RULES_LIST: &str = "rules-list";
pub const CANCEL_PENDING: &str = "cancel-pending";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub name: String,
    pub parameters: BTreeMap<String, String>,
    pub turns_to_live: u32,
}

impl Context {
    pub fn new(name: &str, params: &[(&str, String)]) -> Self {
        Self {
            name: name.to_string(),
            parameters: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            turns_to_live: CONTEXT_TTL,
        }
    }

    pub fn param(&self, key: &str) -> &str {
        self.parameters.get(key).map_or("", String::as_str)
    }

    fn ids(&self, key: &str) -> Vec<u64> {
        self.param(key)
            .split(',')
            .filter_map(|s| s.parse().ok())
            .collect()
    }
}

fn join_ids(ids: impl IntoIterator<Item = u64>) -> String {
    ids.into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConversationState {
    pub session_id: String,
    pub active_contexts: Vec<Context>,
    pub pending_intent: Option<Intent>,
    /// The pending question was already repeated once.
    pub reprompted: bool,
}

impl ConversationState {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            ..Self::default()
        }
    }

    pub fn context(&self, name: &str) -> Option<&Context> {
        self.active_contexts.iter().find(|c| c.name == name)
    }

    pub fn context_names(&self) -> Vec<&str> {
        self.active_contexts.iter().map(|c| c.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reply {
    pub text: String,
    pub end_of_exchange: bool,
    pub output_contexts: Vec<Context>,
    /// Utterances that make sense next (quick replies).
    pub suggestions: Vec<String>,
}

/// Work for the engine produced by a turn.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineRequest {
    Execute(CommandDraft),
    Cancel {
        command: CommandId,
        utterance: String,
    },
    Reschedule {
        command: CommandId,
        time: chrono::NaiveTime,
        utterance: String,
    },
}

impl EngineRequest {
    pub fn apply(&self, engine: &mut Engine) -> Result<(), EngineError> {
        match self {
            EngineRequest::Execute(d) => engine.submit(d.clone()).map(|_| ()),
            EngineRequest::Cancel { command, utterance } => {
                engine.undo(*command, utterance).map(|_| ())
            }
            EngineRequest::Reschedule {
                command,
                time,
                utterance,
            } => engine.reschedule(*command, *time, utterance).map(|_| ()),
        }
    }
}

/// Read access the dialogue needs from the engine.
pub trait EngineView {
    fn registry(&self) -> &Registry;
    fn now(&self) -> Timestamp;
    fn log_entries(&self) -> &[LogEntry];
    fn command(&self, id: CommandId) -> Option<&Command>;
    fn active_rules(&self) -> Vec<&Command>;
    fn last_cancellable(&self) -> Option<&Command>;
}

impl EngineView for Engine {
    fn registry(&self) -> &Registry {
        Engine::registry(self)
    }
    fn now(&self) -> Timestamp {
        Engine::now(self)
    }
    fn log_entries(&self) -> &[LogEntry] {
        Engine::log_entries(self)
    }
    fn command(&self, id: CommandId) -> Option<&Command> {
        Engine::command(self, id)
    }
    fn active_rules(&self) -> Vec<&Command> {
        Engine::active_rules(self)
    }
    fn last_cancellable(&self) -> Option<&Command> {
        Engine::last_cancellable(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub reply: Reply,
    pub state: ConversationState,
    pub request: Option<EngineRequest>,
}

/// What a turn decided, before context bookkeeping.
#[derive(Default)]
struct Outcome {
    text: String,
    new_contexts: Vec<Context>,
    consumed: Vec<&'static str>,
    /// Keep (and refresh) these contexts instead of ageing them.
    refreshed: Vec<&'static str>,
    pending: Option<Intent>,
    reprompted: bool,
    request: Option<EngineRequest>,
}

impl Outcome {
    fn say(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            ..Self::default()
        }
    }
}

pub fn handle_turn(state: &ConversationState, utterance: &str, view: &dyn EngineView) -> Turn {
    let names = state.context_names();
    let parsed = grammar::parse(utterance, view.registry(), &names);
    let outcome = match parsed {
        ParseResult::Intent(intent) => dispatch(state, intent, view),
        ParseResult::NoMatch { .. } => unparsed(state),
    };
    finish(state, outcome)
}

fn finish(state: &ConversationState, o: Outcome) -> Turn {
    let mut contexts: Vec<Context> = state
        .active_contexts
        .iter()
        .filter(|c| !o.consumed.contains(&c.name.as_str()))
        .filter(|c| !o.new_contexts.iter().any(|n| n.name == c.name))
        .cloned()
        .filter_map(|mut c| {
            if o.refreshed.contains(&c.name.as_str()) {
                c.turns_to_live = CONTEXT_TTL;
            } else {
                c.turns_to_live = c.turns_to_live.saturating_sub(1);
            }
            (c.turns_to_live > 0).then_some(c)
        })
        .collect();
    contexts.extend(o.new_contexts.iter().cloned());

    let reprompted_before = state.reprompted && o.pending.is_none();
    let pending = match o.pending {
        Some(p) => Some(p),
        None if !o.consumed.contains(&DEVICE_CHOICE) => state.pending_intent.clone(),
        None => None,
    };
    // a pending intent lives only as long as the context that gates it
    let pending = pending.filter(|_| contexts.iter().any(|c| c.name == DEVICE_CHOICE));
    let reprompted = pending.is_some() && (o.reprompted || reprompted_before);

    let suggestions = suggestions(&contexts);
    let reply = Reply {
        text: o.text,
        end_of_exchange: contexts.is_empty(),
        output_contexts: o.new_contexts,
        suggestions,
    };
    Turn {
        reply,
        state: ConversationState {
            session_id: state.session_id.clone(),
            active_contexts: contexts,
            pending_intent: pending,
            reprompted,
        },
        request: o.request,
    }
}

fn suggestions(contexts: &[Context]) -> Vec<String> {
    let mut out = Vec::new();
    for c in contexts {
        match c.name.as_str() {
            DEVICE_CHOICE => out.extend(
                c.param("names")
                    .split('|')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.to_string()),
            ),
            CAUSAL_CHAIN if c.param("cursor") != c.param("links") => out.push("tell me more".into()),
            CANCEL_PENDING => out.extend(["yes".to_string(), "no".to_string()]),
            _ => {}
        }
    }
    out
}

fn unparsed(state: &ConversationState) -> Outcome {
    match (&state.pending_intent, state.context(DEVICE_CHOICE)) {
        (Some(_), Some(ctx)) if !state.reprompted => Outcome {
            text: format!("{NOT_UNDERSTOOD} {}", ctx.param("prompt")),
            refreshed: vec![DEVICE_CHOICE],
            reprompted: true,
            ..Outcome::default()
        },
        (Some(_), _) => Outcome {
            text: NOT_UNDERSTOOD.into(),
            consumed: vec![DEVICE_CHOICE],
            ..Outcome::default()
        },
        _ => Outcome::say(NOT_UNDERSTOOD),
    }
}

fn dispatch(state: &ConversationState, intent: Intent, view: &dyn EngineView) -> Outcome {
    match intent.kind {
        IntentKind::DirectAction
        | IntentKind::DelayedAction
        | IntentKind::Repeating
        | IntentKind::Event
        | IntentKind::RulesDefined => complete(intent, view),
        IntentKind::WhyDidSomethingHappen if intent.slots.contains_key("event") => {
            complete(intent, view)
        }
        IntentKind::WhyDidSomethingHappen => tell_me_more(state, view),
        IntentKind::ConfirmThingChoice => choose(state, &intent, view),
        IntentKind::RulesDefinedChangeSingleRule => change_rule(state, &intent, view),
        IntentKind::CancelCommand => match view.last_cancellable() {
            None => Outcome::say(NOTHING_TO_CANCEL),
            Some(cmd) => Outcome {
                text: format!(
                    "Are you sure you want to cancel \"{}\"?",
                    describe(&cmd.spec, view.registry())
                ),
                new_contexts: vec![Context::new(
                    CANCEL_PENDING,
                    &[("command", cmd.id().0.to_string())],
                )],
                ..Outcome::default()
            },
        },
        IntentKind::ConfirmCancel => confirm_cancel(state, &intent, view),
        IntentKind::WhatCanYouDo => Outcome::say(CAPABILITIES),
    }
}

fn device_slot<'a>(intent: &'a Intent, slot: &str) -> Option<&'a DeviceRef> {
    match intent.slot(slot)? {
        Resolved::Action { device, .. } | Resolved::Event { device, .. } | Resolved::Device(device) => {
            Some(device)
        }
        _ => None,
    }
}

fn device_slot_mut<'a>(intent: &'a mut Intent, slot: &str) -> Option<&'a mut DeviceRef> {
    match &mut intent.slots.get_mut(slot)?.resolved {
        Resolved::Action { device, .. } | Resolved::Event { device, .. } | Resolved::Device(device) => {
            Some(device)
        }
        _ => None,
    }
}

fn pretty_phrase(phrase: &str) -> String {
    normalize_name(phrase).unwrap_or_else(|_| phrase.to_string())
}

/// Resolves every device slot, asking about the first ambiguous one, then
/// carries the intent out.
fn complete(mut intent: Intent, view: &dyn EngineView) -> Outcome {
    let registry = view.registry();
    let slots: Vec<&str> = match intent.kind {
        IntentKind::Event => vec!["action", "event"],
        _ => vec!["device"],
    };
    for slot in slots {
        let Some(device) = device_slot(&intent, slot) else {
            continue;
        };
        match &device.matched {
            MatchResult::Unique(_) => {}
            MatchResult::None => return Outcome::say(unknown_device(&pretty_phrase(&device.phrase))),
            MatchResult::Ambiguous(ids) => {
                let names: Vec<String> = ids.iter().map(|id| registry.name_of(id)).collect();
                let prompt = device_question(&names);
                return Outcome {
                    text: prompt.clone(),
                    new_contexts: vec![Context::new(
                        DEVICE_CHOICE,
                        &[
                            ("slot", slot.to_string()),
                            (
                                "candidates",
                                ids.iter().map(|i| i.as_str()).collect::<Vec<_>>().join(","),
                            ),
                            ("names", names.join("|")),
                            ("prompt", prompt),
                        ],
                    )],
                    pending: Some(intent),
                    ..Outcome::default()
                };
            }
        }
    }
    // the standalone device slot mirrors the clause it came from
    if intent.kind != IntentKind::Event {
        if let Some(resolved) = device_slot(&intent, "device").cloned() {
            for slot in ["action", "event"] {
                if let Some(d) = device_slot_mut(&mut intent, slot) {
                    *d = resolved.clone();
                }
            }
        }
    }
    carry_out(&intent, view)
}

fn unique(intent: &Intent, slot: &str) -> Option<DeviceId> {
    device_slot(intent, slot)?.matched.unique().cloned()
}

fn resolve_time(expr: TimeExpr, now: Timestamp) -> TimeSpec {
    match expr {
        TimeExpr::In(secs) => TimeSpec::Delay(secs),
        TimeExpr::At(t) => TimeSpec::Instant(next_occurrence(now, t)),
        TimeExpr::Between(a, b) => {
            let start = next_occurrence(now, a);
            let mut end = start.date().and_time(b);
            if end <= start {
                end += Duration::days(1);
            }
            TimeSpec::Period { start, end }
        }
        TimeExpr::DailyAt(t) => TimeSpec::DailyAt(t),
        TimeExpr::DailyBetween(a, b) => TimeSpec::DailyPeriod { start: a, end: b },
    }
}

fn time_words(expr: TimeExpr) -> String {
    match expr {
        TimeExpr::In(secs) => format!(" in {}", format_duration(secs)),
        TimeExpr::At(t) => format!(" at {}", format_time_long(t)),
        TimeExpr::Between(a, b) => format!(" from {} to {}", format_time_long(a), format_time_long(b)),
        TimeExpr::DailyAt(t) => format!(" every day at {}", format_time_long(t)),
        TimeExpr::DailyBetween(a, b) => format!(
            " every day from {} to {}",
            format_time_long(a),
            format_time_long(b)
        ),
    }
}

fn present_participle(action: &Action, registry: &Registry) -> String {
    let phrase = action_phrase(action, registry);
    match action.kind {
        ActionKind::TurnOn | ActionKind::TurnOff => phrase.replacen("turn", "turning", 1),
        ActionKind::SetValue => phrase.replacen("set", "setting", 1),
    }
}

fn carry_out(intent: &Intent, view: &dyn EngineView) -> Outcome {
    let registry = view.registry();
    match intent.kind {
        IntentKind::WhyDidSomethingHappen => {
            let (Some(Resolved::Event { predicate, .. }), Some(device)) =
                (intent.slot("event"), unique(intent, "event"))
            else {
                return Outcome::say(NOT_UNDERSTOOD);
            };
            let cond = Condition::new(device.clone(), predicate.clone());
            match resolve_why(&cond, view.log_entries(), view.now()) {
                Err(_) => Outcome::say(NO_CAUSE),
                Ok(answer) => {
                    let ls = links(&answer.chain);
                    Outcome {
                        text: render_why_answer(&answer, registry),
                        new_contexts: vec![Context::new(
                            CAUSAL_CHAIN,
                            &[
                                ("seqs", join_ids(answer.chain.iter().map(|e| e.seq))),
                                ("cursor", "1".into()),
                                ("links", ls.len().to_string()),
                                ("device", device.to_string()),
                            ],
                        )],
                        ..Outcome::default()
                    }
                }
            }
        }
        IntentKind::RulesDefined => {
            let rules: Vec<&Command> = match unique(intent, "device") {
                Some(d) => view
                    .active_rules()
                    .into_iter()
                    .filter(|c| c.spec.action.device_id == d)
                    .collect(),
                None => view.active_rules(),
            };
            let text = match unique(intent, "device").and_then(|d| registry.get(&d)) {
                Some(desc) => render_rules_list(desc, &rules, registry),
                None if rules.is_empty() => "No rules are defined.".into(),
                None => numbered(&rules, registry),
            };
            let new_contexts = if rules.is_empty() {
                Vec::new()
            } else {
                vec![Context::new(
                    RULES_LIST,
                    &[("rule_ids", join_ids(rules.iter().map(|c| c.id().0)))],
                )]
            };
            Outcome {
                text,
                new_contexts,
                ..Outcome::default()
            }
        }
        _ => {
            let (Some(Resolved::Action { kind, argument, .. }), Some(device)) =
                (intent.slot("action"), unique(intent, "action"))
            else {
                return Outcome::say(NOT_UNDERSTOOD);
            };
            let action = match kind {
                ActionKind::TurnOn => Action::turn_on(device),
                ActionKind::TurnOff => Action::turn_off(device),
                ActionKind::SetValue => match argument {
                    Some(v) => Action::set_value(device, v.clone()),
                    None => return Outcome::say(NOT_UNDERSTOOD),
                },
            };
            let trigger = match (intent.slot("event"), unique(intent, "event")) {
                (Some(Resolved::Event { predicate, .. }), Some(d)) => {
                    Some(Condition::new(d, predicate.clone()))
                }
                _ => None,
            };
            let time = intent.time();
            let text = match (&trigger, time) {
                (Some(cond), _) => format!(
                    "Okay, I will {} when {}.",
                    action_phrase(&action, registry),
                    condition_phrase(cond, registry)
                ),
                (None, Some(t)) => format!(
                    "Okay, I will {}{}.",
                    action_phrase(&action, registry),
                    time_words(t)
                ),
                (None, None) => format!("Okay, {}.", present_participle(&action, registry)),
            };
            Outcome {
                text,
                request: Some(EngineRequest::Execute(CommandDraft {
                    action,
                    time: time.map(|t| resolve_time(t, view.now())),
                    trigger,
                    utterance: intent.utterance.clone(),
                })),
                ..Outcome::default()
            }
        }
    }
}

fn choose(state: &ConversationState, answer: &Intent, view: &dyn EngineView) -> Outcome {
    let (Some(ctx), Some(pending)) = (state.context(DEVICE_CHOICE), &state.pending_intent) else {
        return Outcome::say(NOT_UNDERSTOOD);
    };
    let candidates: Vec<DeviceId> = ctx.param("candidates").split(',').map(DeviceId::new).collect();
    let phrase = device_slot(answer, "device").map(|d| d.phrase.clone()).unwrap_or_default();
    let wanted = normalize_name(&phrase).unwrap_or_default();
    let wanted: Vec<&str> = wanted.split(' ').collect();
    let hits: Vec<&DeviceId> = candidates
        .iter()
        .filter(|id| {
            view.registry().get(id).is_some_and(|d| {
                let name = d.normalized_name();
                let have: Vec<&str> = name.split(' ').collect();
                wanted.iter().all(|w| have.contains(w))
            })
        })
        .collect();
    match hits.as_slice() {
        [id] => {
            let mut intent = pending.clone();
            let slot = ctx.param("slot").to_string();
            if let Some(d) = device_slot_mut(&mut intent, &slot) {
                d.matched = MatchResult::Unique((*id).clone());
            }
            if slot != "device" {
                if let Some(d) = device_slot_mut(&mut intent, "device") {
                    d.matched = MatchResult::Unique((*id).clone());
                }
            }
            let mut out = complete(intent, view);
            out.consumed.push(DEVICE_CHOICE);
            out
        }
        _ => unparsed(state),
    }
}

fn tell_me_more(state: &ConversationState, view: &dyn EngineView) -> Outcome {
    let Some(ctx) = state.context(CAUSAL_CHAIN) else {
        return Outcome::say(NOT_UNDERSTOOD);
    };
    let seqs = ctx.ids("seqs");
    let chain: Vec<LogEntry> = seqs
        .iter()
        .filter_map(|s| view.log_entries().iter().find(|e| e.seq == *s).cloned())
        .collect();
    let ls = links(&chain);
    let cursor: usize = ctx.param("cursor").parse().unwrap_or(ls.len());
    match ls.get(cursor) {
        None => Outcome {
            text: WHOLE_STORY.into(),
            consumed: vec![CAUSAL_CHAIN],
            ..Outcome::default()
        },
        Some(link) => {
            let mut text = render_link(cursor, link, view.registry());
            if cursor + 1 < ls.len() {
                text.push_str(TELL_ME_MORE);
            }
            let mut next = ctx.clone();
            next.parameters
                .insert("cursor".into(), (cursor + 1).to_string());
            next.turns_to_live = CONTEXT_TTL;
            Outcome {
                text,
                new_contexts: vec![next],
                ..Outcome::default()
            }
        }
    }
}

/// Rules a "change it" may refer to, from the newest relevant context.
fn change_candidates(state: &ConversationState, view: &dyn EngineView) -> Option<(&'static str, Vec<CommandId>)> {
    let ctx = state
        .active_contexts
        .iter()
        .rev()
        .find(|c| c.name == CAUSAL_CHAIN || c.name == RULES_LIST)?;
    if ctx.name == RULES_LIST {
        let ids = ctx.ids("rule_ids").into_iter().map(CommandId).collect();
        return Some((RULES_LIST, ids));
    }
    let chain: Vec<LogEntry> = ctx
        .ids("seqs")
        .iter()
        .filter_map(|s| view.log_entries().iter().find(|e| e.seq == *s).cloned())
        .collect();
    let shown: usize = ctx.param("cursor").parse().unwrap_or(1);
    let mut ids: Vec<CommandId> = links(&chain)
        .iter()
        .take(shown)
        .filter_map(|l| l.rule())
        .collect();
    ids.dedup();
    Some((CAUSAL_CHAIN, ids))
}

fn change_rule(state: &ConversationState, intent: &Intent, view: &dyn EngineView) -> Outcome {
    let Some(TimeExpr::At(time)) = intent.time() else {
        return Outcome::say(NOT_UNDERSTOOD);
    };
    let Some((ctx_name, ids)) = change_candidates(state, view) else {
        return Outcome::say(NO_RULE_TO_CHANGE);
    };
    let target = match intent.slot("rule") {
        Some(Resolved::Rule(n)) if ctx_name == RULES_LIST => ids.get(*n as usize - 1).copied(),
        Some(_) => None,
        None if ids.len() == 1 => ids.first().copied(),
        None if ids.is_empty() => return Outcome::say(NO_RULE_TO_CHANGE),
        None => {
            return Outcome {
                text: WHICH_RULE.into(),
                refreshed: vec![ctx_name],
                ..Outcome::default()
            }
        }
    };
    let Some(cmd) = target.and_then(|id| view.command(id)) else {
        return Outcome {
            text: WHICH_RULE.into(),
            refreshed: vec![ctx_name],
            ..Outcome::default()
        };
    };
    if !matches!(cmd.kind(), CommandKind::Repeating | CommandKind::Delayed) {
        return Outcome::say(SINGLE_TIME_ONLY);
    }
    Outcome {
        text: format!(
            "Sure, {} timer was changed.",
            view.registry().name_of(&cmd.spec.action.device_id)
        ),
        consumed: vec![ctx_name],
        request: Some(EngineRequest::Reschedule {
            command: cmd.id(),
            time,
            utterance: intent.utterance.clone(),
        }),
        ..Outcome::default()
    }
}

fn confirm_cancel(state: &ConversationState, intent: &Intent, view: &dyn EngineView) -> Outcome {
    let Some(ctx) = state.context(CANCEL_PENDING) else {
        return Outcome::say(NOT_UNDERSTOOD);
    };
    let mut out = match (intent.slot("answer"), ctx.ids("command").first()) {
        (Some(Resolved::Answer(true)), Some(id)) => match view.command(CommandId(*id)) {
            Some(cmd) => Outcome {
                text: format!(
                    "Okay, I cancelled \"{}\".",
                    describe(&cmd.spec, view.registry())
                ),
                request: Some(EngineRequest::Cancel {
                    command: cmd.id(),
                    utterance: intent.utterance.clone(),
                }),
                ..Outcome::default()
            },
            None => Outcome::say(NOTHING_TO_CANCEL),
        },
        _ => Outcome::say(KEEP_IT),
    };
    out.consumed.push(CANCEL_PENDING);
    out
}

/// Runs one full turn against an engine: dialogue, then the engine request,
/// then the folded reply.
pub fn run_turn(engine: &mut Engine, state: &mut ConversationState, utterance: &str) -> Reply {
    let turn = handle_turn(state, utterance, engine);
    *state = turn.state;
    match turn.request {
        Some(req) => {
            let outcome = req.apply(engine);
            if let Err(e) = &outcome {
                log::info!("request refused: {e}");
            }
            fold(turn.reply, &outcome, engine.registry())
        }
        None => turn.reply,
    }
}

/// Replaces the reply text when the engine refused the request.
pub fn fold(mut reply: Reply, outcome: &Result<(), EngineError>, registry: &Registry) -> Reply {
    let Err(e) = outcome else {
        return reply;
    };
    reply.text = match e {
        EngineError::Unsupported { device, .. } => format!("The {device} can't do that."),
        EngineError::UnknownDevice(id) => unknown_device(&registry.name_of(id)),
        EngineError::NotReschedulable(_) => SINGLE_TIME_ONLY.into(),
        EngineError::NothingToCancel | EngineError::AlreadyCancelled(_) => NOTHING_TO_CANCEL.into(),
        other => format!("Sorry, I couldn't do that: {other}."),
    };
    reply
}
