use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, CommandId, CommandSpec, DeviceId, StateValue, Timestamp};

#[derive(Debug, Error)]
#[error("log storage failed: {0}")]
pub struct StorageError(#[from] pub std::io::Error);

/// The state change that provoked an event-rule firing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub device: DeviceId,
    /// Seq of the state-change message on the device's event queue.
    pub seq: u64,
    pub old: StateValue,
    pub new: StateValue,
    /// Log entry whose action produced the state change; `None` for external changes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caused_by: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Actor {
    User {
        utterance: String,
        command: CommandId,
    },
    Rule {
        command: CommandId,
    },
    Event {
        command: CommandId,
        trigger: Trigger,
    },
}

impl Actor {
    pub fn command(&self) -> CommandId {
        match self {
            Actor::User { command, .. } | Actor::Rule { command } | Actor::Event { command, .. } => {
                *command
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Effect {
    ActionPerformed {
        action: Action,
        old: StateValue,
        new: StateValue,
    },
    RuleCreated {
        command: CommandSpec,
        /// Target device state when the rule was created.
        snapshot: StateValue,
    },
    /// The command was cancelled (rules and direct actions alike).
    RuleRemoved { command: CommandId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub at: Timestamp,
    pub actor: Actor,
    pub effect: Effect,
}

impl LogEntry {
    pub fn performed(&self) -> Option<(&Action, &StateValue, &StateValue)> {
        match &self.effect {
            Effect::ActionPerformed { action, old, new } => Some((action, old, new)),
            _ => None,
        }
    }
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {} ", self.seq, self.at.format("%Y-%m-%d %H:%M:%S"))?;
        match &self.actor {
            Actor::User { utterance, .. } => write!(f, "user({utterance:?})")?,
            Actor::Rule { command } => write!(f, "rule({command})")?,
            Actor::Event { command, trigger } => {
                write!(f, "event({command}, {}#{})", trigger.device, trigger.seq)?
            }
        }
        match &self.effect {
            Effect::ActionPerformed { action, old, new } => {
                write!(f, " {} {} {old} -> {new}", action.kind, action.device_id)
            }
            Effect::RuleCreated { command, .. } => {
                write!(f, " created {} {:?}", command.id, command.kind)
            }
            Effect::RuleRemoved { command } => write!(f, " removed {command}"),
        }
    }
}

/// Durable destination for log records.
pub trait LogSink: Send {
    fn append(&mut self, entry: &LogEntry) -> Result<(), StorageError>;

    /// Records the clock position so a restart resumes from it.
    fn mark_clock(&mut self, _at: Timestamp) -> Result<(), StorageError> {
        Ok(())
    }
}

/// Append-only command/action log. Entries are written to the sink before
/// they become visible in memory.
#[derive(Default)]
pub struct CommandLog {
    entries: Vec<LogEntry>,
    sink: Option<Box<dyn LogSink>>,
}

impl fmt::Debug for CommandLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CommandLog")
            .field("entries", &self.entries.len())
            .field("durable", &self.sink.is_some())
            .finish()
    }
}

impl CommandLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resumes from previously persisted entries.
    pub fn with_entries(entries: Vec<LogEntry>, sink: Option<Box<dyn LogSink>>) -> Self {
        Self { entries, sink }
    }

    pub fn set_sink(&mut self, sink: Box<dyn LogSink>) {
        self.sink = Some(sink);
    }

    pub fn next_seq(&self) -> u64 {
        self.entries.last().map_or(1, |e| e.seq + 1)
    }

    pub fn append(
        &mut self,
        at: Timestamp,
        actor: Actor,
        effect: Effect,
    ) -> Result<&LogEntry, StorageError> {
        let at = match self.entries.last() {
            Some(last) if last.at > at => last.at,
            _ => at,
        };
        let entry = LogEntry {
            seq: self.next_seq(),
            at,
            actor,
            effect,
        };
        if let Some(sink) = self.sink.as_mut() {
            sink.append(&entry)?;
        }
        self.entries.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn mark_clock(&mut self, at: Timestamp) -> Result<(), StorageError> {
        match self.sink.as_mut() {
            Some(sink) => sink.mark_clock(at),
            None => Ok(()),
        }
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn get(&self, seq: u64) -> Option<&LogEntry> {
        // seqs are dense from the first entry
        let first = self.entries.first()?.seq;
        let idx = seq.checked_sub(first)? as usize;
        self.entries.get(idx).filter(|e| e.seq == seq)
    }

    pub fn since(&self, seq: u64) -> &[LogEntry] {
        let idx = self.entries.partition_point(|e| e.seq <= seq);
        &self.entries[idx..]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
