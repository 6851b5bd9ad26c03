//! Fixed English reply templates.

use crate::causality::{Actor, CausalAnswer, Effect, LogEntry};
use crate::engine::describe::{capitalize, describe_sentence};
use crate::engine::Command;
use crate::model::{
    format_time_short, ActionKind, CommandId, DeviceDescriptor, DeviceId, DeviceKind, Registry,
    StateValue,
};

pub const NOT_UNDERSTOOD: &str = "Sorry, I didn't understand that.";
pub const NO_CAUSE: &str = "I don't know why that happened.";
pub const WHOLE_STORY: &str = "That's the whole story.";
pub const TELL_ME_MORE: &str = " Say \"tell me more\" to find out more.";
pub const WHICH_RULE: &str = "Which rule do you mean?";
pub const NOTHING_TO_CANCEL: &str = "There is nothing to cancel.";
pub const NO_RULE_TO_CHANGE: &str = "There is no rule to change.";
pub const KEEP_IT: &str = "Okay, I won't cancel it.";
pub const SINGLE_TIME_ONLY: &str = "I can only change rules that happen at a single time.";
pub const CAPABILITIES: &str = "I can turn devices on and off now, later, between two times or \
every day, and whenever another device changes. Ask me what rules are defined for a device, \
why something happened, or to cancel the last command.";

/// `the bedroom light or the living room light`
pub fn alternatives(names: &[String]) -> String {
    let names: Vec<String> = names.iter().map(|n| format!("the {n}")).collect();
    match names.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [rest @ .., last] => format!("{} or {last}", rest.join(", ")),
    }
}

pub fn device_question(names: &[String]) -> String {
    format!("Do you mean {}?", alternatives(names))
}

pub fn unknown_device(phrase: &str) -> String {
    format!("I couldn't find a device called \"{phrase}\".")
}

/// `turned on`, `was activated`, `changed to 25 C`
pub fn transition(kind: DeviceKind, old: &StateValue, new: &StateValue) -> String {
    match (kind, new) {
        (DeviceKind::Sensor, StateValue::OnOff(true)) => "was activated".into(),
        (DeviceKind::Sensor, StateValue::OnOff(false)) => "was deactivated".into(),
        (_, StateValue::OnOff(true)) => "turned on".into(),
        (_, StateValue::OnOff(false)) => "turned off".into(),
        (_, StateValue::Scalar(s)) => match old.scalar() {
            Some(o) if s.value > o => format!("went up to {s}"),
            Some(o) if s.value < o => format!("went down to {s}"),
            _ => format!("changed to {s}"),
        },
    }
}

fn it_phrase(kind: ActionKind, entry: &LogEntry) -> String {
    match kind {
        ActionKind::TurnOn => "turn it on".into(),
        ActionKind::TurnOff => "turn it off".into(),
        ActionKind::SetValue => match entry.performed().map(|(_, _, new)| new) {
            Some(v) => format!("set it to {v}"),
            None => "set it".into(),
        },
    }
}

/// One step of an explanation: an action entry and, for scheduled rules, the
/// entry that created the rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Link<'a> {
    pub action: &'a LogEntry,
    pub created: Option<&'a LogEntry>,
}

impl Link<'_> {
    /// The rule behind this step, if any.
    pub fn rule(&self) -> Option<CommandId> {
        match &self.action.actor {
            Actor::Rule { command } | Actor::Event { command, .. } => Some(*command),
            Actor::User { .. } => None,
        }
    }
}

pub fn links(chain: &[LogEntry]) -> Vec<Link<'_>> {
    let mut out: Vec<Link<'_>> = Vec::new();
    for e in chain {
        match &e.effect {
            Effect::RuleCreated { .. } => match out.last_mut() {
                Some(l) if matches!(l.action.actor, Actor::Rule { .. }) && l.created.is_none() => {
                    l.created = Some(e)
                }
                _ => out.push(Link {
                    action: e,
                    created: None,
                }),
            },
            _ => out.push(Link {
                action: e,
                created: None,
            }),
        }
    }
    out
}

fn device_kind(registry: &Registry, id: &DeviceId) -> DeviceKind {
    registry.get(id).map_or(DeviceKind::Toggleable, |d| d.kind)
}

/// Sentence for link `index` of an explanation.
pub fn render_link(index: usize, link: &Link<'_>, registry: &Registry) -> String {
    let entry = link.action;
    let Some((action, old, new)) = entry.performed() else {
        return "You created that rule.".into();
    };
    let kind = device_kind(registry, &action.device_id);
    let what = transition(kind, old, new);
    let cause = match &entry.actor {
        Actor::User { .. } | Actor::Rule { .. } => format!(
            "you told me to {} at {}",
            it_phrase(action.kind, entry),
            format_time_short(entry.at.time())
        ),
        Actor::Event { trigger, .. } => format!(
            "the {} {}",
            registry.name_of(&trigger.device),
            transition(device_kind(registry, &trigger.device), &trigger.old, &trigger.new)
        ),
    };
    match (index, &entry.actor) {
        (0, Actor::Event { .. }) => format!("It {what} because {cause}."),
        (0, _) => format!("{}.", capitalize(&cause)),
        _ => format!(
            "The {} {what} because {cause}.",
            registry.name_of(&action.device_id)
        ),
    }
}

/// First reply to a "why" question: the most immediate cause, with an
/// invitation to continue when more of the chain remains.
pub fn render_why_answer(answer: &CausalAnswer, registry: &Registry) -> String {
    let links = links(&answer.chain);
    match links.first() {
        None => NO_CAUSE.into(),
        Some(first) => {
            let mut text = render_link(0, first, registry);
            if links.len() > 1 {
                text.push_str(TELL_ME_MORE);
            }
            text
        }
    }
}

/// Numbered list of rules for one device.
pub fn render_rules_list(device: &DeviceDescriptor, rules: &[&Command], registry: &Registry) -> String {
    if rules.is_empty() {
        return format!("No rules are defined for the {}.", device.name);
    }
    numbered(rules, registry)
}

pub fn numbered(rules: &[&Command], registry: &Registry) -> String {
    rules
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. {}", i + 1, describe_sentence(&c.spec, registry)))
        .collect::<Vec<_>>()
        .join(" ")
}
