//! The persistent command/action log and "why did X happen?" resolution.

mod log;
mod why;

pub use log::{Actor, CommandLog, Effect, LogEntry, LogSink, StorageError, Trigger};
pub use why::{
    action_could_cause, could_have_caused, resolve_why, resolve_why_with, CausalAnswer,
    CausePolicy, NoCause,
};
