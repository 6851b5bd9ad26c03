//! Shared domain vocabulary: devices, actions, conditions, time specifications,
//! command specifications and the clock contract.

mod clock;
mod command;
mod condition;
mod device;
mod name;
mod time;

pub use clock::{Clock, SystemClock, TimerHandle, Timers, VirtualClock, WallClock};
pub use command::{CommandId, CommandKind, CommandSpec};
pub use condition::{eval_condition, Condition, Direction, Predicate};
pub use device::{
    Action, ActionKind, DeviceDescriptor, DeviceId, DeviceKind, DeviceState, Registry, Scalar,
    StateValue,
};
pub use name::{match_device, normalize_name, MatchResult};
pub use time::{
    format_time_long, format_time_short, next_occurrence, parse_timestamp, TimeSpec, Timestamp,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid device name {0:?}")]
    InvalidName(String),
    #[error("predicate {predicate} cannot be evaluated against {value} state")]
    TypeMismatch { predicate: String, value: String },
    #[error("condition refers to device {expected} but state belongs to {found}")]
    DeviceMismatch { expected: String, found: String },
    #[error("invalid device descriptor {id}: {reason}")]
    InvalidDescriptor { id: String, reason: String },
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid time specification: {0}")]
    InvalidTime(String),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
}
