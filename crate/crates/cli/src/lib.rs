//! Command-line front end: HTTP gateway and interactive REPL.

pub mod repl;
pub mod server;
