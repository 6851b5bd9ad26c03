//! Conversational smart-space management.
//!
//! Utterances are parsed by a deterministic intent grammar, resolved against
//! multi-turn dialogue state, and executed by an undoable command engine over
//! an in-process publish/subscribe device fabric. Every executed action is
//! recorded in an append-only log that answers "why did X happen?" queries.

pub mod bus;
pub mod causality;
pub mod dialogue;
pub mod engine;
pub mod grammar;
pub mod model;
pub mod persistence;
pub mod scenario;
pub mod system;

pub use model::*;
