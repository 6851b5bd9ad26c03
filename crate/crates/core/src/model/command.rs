use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Action, ActionKind, Condition, ModelError, TimeSpec, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommandId(pub u64);

impl fmt::Display for CommandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Direct,
    Delayed,
    Period,
    Repeating,
    RepeatingPeriod,
    EventRule,
}

impl CommandKind {
    pub fn for_time(time: Option<&TimeSpec>, has_trigger: bool) -> CommandKind {
        if has_trigger {
            return CommandKind::EventRule;
        }
        match time {
            None => CommandKind::Direct,
            Some(TimeSpec::Instant(_) | TimeSpec::Delay(_)) => CommandKind::Delayed,
            Some(TimeSpec::Period { .. }) => CommandKind::Period,
            Some(TimeSpec::DailyAt(_)) => CommandKind::Repeating,
            Some(TimeSpec::DailyPeriod { .. }) => CommandKind::RepeatingPeriod,
        }
    }
}

/// The immutable definition of a command, as recorded in the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandSpec {
    pub id: CommandId,
    pub kind: CommandKind,
    pub action: Action,
    /// Second action of a period pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<Condition>,
    pub created_by: String,
    pub created_at: Timestamp,
}

impl CommandSpec {
    /// Builds a spec, deriving the kind and the paired action for period kinds.
    pub fn new(
        id: CommandId,
        action: Action,
        time: Option<TimeSpec>,
        trigger: Option<Condition>,
        created_by: impl Into<String>,
        created_at: Timestamp,
    ) -> Result<Self, ModelError> {
        if time.is_some() && trigger.is_some() {
            return Err(ModelError::InvalidCommand(
                "a command is either timed or triggered, not both".into(),
            ));
        }
        action.validate_shape()?;
        if let Some(t) = &time {
            t.validate()?;
        }
        let kind = CommandKind::for_time(time.as_ref(), trigger.is_some());
        let paired = match kind {
            CommandKind::Period | CommandKind::RepeatingPeriod => {
                Some(action.inverse().ok_or_else(|| {
                    ModelError::InvalidCommand("period actions must turn a device on or off".into())
                })?)
            }
            _ => None,
        };
        Ok(Self {
            id,
            kind,
            action,
            paired,
            time,
            trigger,
            created_by: created_by.into(),
            created_at,
        })
    }

    /// Every action this command may perform.
    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        std::iter::once(&self.action).chain(self.paired.iter())
    }

    pub fn is_period(&self) -> bool {
        matches!(self.kind, CommandKind::Period | CommandKind::RepeatingPeriod)
    }

    pub fn targets_set_value(&self) -> bool {
        self.action.kind == ActionKind::SetValue
    }
}
