use std::collections::{BTreeMap, HashSet};

use chrono::Duration;

use crate::causality::{Actor, Effect, LogEntry};
use crate::engine::{Command, CommandLifecycle, EngineBootstrap, LifecycleState, Phase};
use crate::model::{
    next_occurrence, CommandId, CommandKind, CommandSpec, DeviceId, Registry, StateValue, TimeSpec,
    Timestamp,
};

struct Rebuilt {
    cmd: Command,
    last_fire: Option<Timestamp>,
}

fn known(spec: &CommandSpec, registry: &Registry) -> bool {
    spec.actions()
        .map(|a| &a.device_id)
        .chain(spec.trigger.iter().map(|c| &c.device_id))
        .all(|d| registry.get(d).is_some())
}

// A reschedule writes RuleRemoved(old) and RuleCreated(new) back to back, at
// the same instant, under the same utterance.
fn replaces(removed: &LogEntry, created: &LogEntry, old: &Command, spec: &CommandSpec) -> bool {
    created.seq == removed.seq + 1
        && created.at == removed.at
        && spec.action == old.spec.action
        && matches!(&removed.actor, Actor::User { utterance, .. } if *utterance == spec.created_by)
}

/// Rebuilds engine state from log entries as of `now`.
///
/// Pure: the same entries, registry and `now` always give the same result.
/// One-shot boundaries that fell before `now` are treated as missed and are
/// not fired; daily rules resume at their next occurrence after `now`.
pub fn replay(entries: &[LogEntry], registry: &Registry, now: Timestamp) -> EngineBootstrap {
    let mut rebuilt: BTreeMap<CommandId, Rebuilt> = BTreeMap::new();
    let mut skipped: HashSet<CommandId> = HashSet::new();
    let mut states: BTreeMap<DeviceId, StateValue> = BTreeMap::new();
    let mut max_id = 0u64;
    let mut last_removed: Option<(&LogEntry, CommandId)> = None;

    for e in entries {
        max_id = max_id.max(e.actor.command().0);
        match &e.effect {
            Effect::RuleCreated { command, snapshot } => {
                max_id = max_id.max(command.id.0);
                if !known(command, registry) {
                    log::warn!("replay: skipping command {} for an unknown device", command.id);
                    skipped.insert(command.id);
                    continue;
                }
                let fired = match last_removed {
                    Some((removed, old)) => rebuilt
                        .get(&old)
                        .filter(|o| replaces(removed, e, &o.cmd, command))
                        .map_or(0, |o| o.cmd.fired),
                    None => 0,
                };
                rebuilt.insert(
                    command.id,
                    Rebuilt {
                        cmd: Command {
                            spec: command.clone(),
                            lifecycle: CommandLifecycle {
                                state: LifecycleState::Created,
                                pending_handle: None,
                            },
                            snapshot: snapshot.clone(),
                            fired,
                        },
                        last_fire: None,
                    },
                );
            }
            Effect::ActionPerformed { action, old, new } => {
                if registry.get(&action.device_id).is_none() {
                    log::warn!("replay: skipping entry {} for unknown device {}", e.seq, action.device_id);
                    continue;
                }
                states.insert(action.device_id.clone(), new.clone());
                match &e.actor {
                    Actor::User { utterance, command } => {
                        // undo restores are logged under the command they undo
                        if rebuilt.contains_key(command) || skipped.contains(command) {
                            continue;
                        }
                        let Ok(spec) =
                            CommandSpec::new(*command, action.clone(), None, None, utterance, e.at)
                        else {
                            continue;
                        };
                        rebuilt.insert(
                            *command,
                            Rebuilt {
                                cmd: Command {
                                    spec,
                                    lifecycle: CommandLifecycle {
                                        state: LifecycleState::Completed,
                                        pending_handle: None,
                                    },
                                    snapshot: old.clone(),
                                    fired: 1,
                                },
                                last_fire: Some(e.at),
                            },
                        );
                    }
                    Actor::Rule { command } | Actor::Event { command, .. } => {
                        if let Some(r) = rebuilt.get_mut(command) {
                            r.cmd.fired += 1;
                            r.last_fire = Some(e.at);
                        }
                    }
                }
            }
            Effect::RuleRemoved { command } => {
                if let Some(r) = rebuilt.get_mut(command) {
                    r.cmd.lifecycle.state = LifecycleState::Cancelled;
                }
                last_removed = Some((e, *command));
                continue;
            }
        }
        last_removed = None;
    }

    let mut commands = Vec::with_capacity(rebuilt.len());
    let mut pending = Vec::new();
    for (id, r) in rebuilt {
        let mut cmd = r.cmd;
        if cmd.lifecycle.state != LifecycleState::Cancelled {
            let (state, next) = resume(&cmd, r.last_fire, now);
            cmd.lifecycle.state = state;
            if let Some((phase, at)) = next {
                pending.push((id, phase, at));
            }
        }
        commands.push(cmd);
    }
    EngineBootstrap {
        commands,
        pending,
        states: states.into_iter().collect(),
        next_command_id: max_id + 1,
    }
}

type Next = Option<(Phase, Timestamp)>;

fn resume(cmd: &Command, last_fire: Option<Timestamp>, now: Timestamp) -> (LifecycleState, Next) {
    use LifecycleState::*;
    let spec = &cmd.spec;
    // a fire logged at exactly `now` must not be repeated
    let after = last_fire.map_or(now, |t| t.max(now));
    match (spec.kind, &spec.time) {
        (CommandKind::Delayed, Some(t)) if cmd.fired == 0 => {
            let at = match t {
                TimeSpec::Instant(at) => (*at).max(spec.created_at),
                TimeSpec::Delay(secs) => spec.created_at + Duration::seconds(*secs as i64),
                _ => return (Completed, None),
            };
            if at > now {
                (FirstPending, Some((Phase::First, at)))
            } else {
                (Completed, None)
            }
        }
        (CommandKind::Period, Some(TimeSpec::Period { start, end })) => match cmd.fired {
            0 if (*start).max(spec.created_at) > now => {
                (FirstPending, Some((Phase::First, (*start).max(spec.created_at))))
            }
            1 if *end > now => (FirstDone, Some((Phase::Second, *end))),
            _ => (Completed, None),
        },
        (CommandKind::Repeating, Some(TimeSpec::DailyAt(t))) => {
            (Rescheduling, Some((Phase::First, next_occurrence(after, *t))))
        }
        (CommandKind::RepeatingPeriod, Some(TimeSpec::DailyPeriod { start, end })) => {
            // the window opened by the last fire, if it is still open
            let open_until = last_fire
                .filter(|_| cmd.fired % 2 == 1)
                .map(|t| next_occurrence(t, *end))
                .filter(|t| *t > now);
            match open_until {
                Some(t) => (Rescheduling, Some((Phase::Second, t))),
                None => (Rescheduling, Some((Phase::First, next_occurrence(after, *start)))),
            }
        }
        (CommandKind::EventRule, _) => (Rescheduling, None),
        _ => (Completed, None),
    }
}
