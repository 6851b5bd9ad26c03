//! Line-oriented terminal front end.

use std::io::{self, BufRead, Write};

use casa_core::scenario::parse_duration;
use casa_core::system::Assistant;

const SESSION: &str = "repl";

const HELP: &str = "\
commands:
  :devices            list devices and their states
  :rules              list active rules
  :log [since]        show log entries after a sequence number
  :advance <duration> move the virtual clock forward (e.g. 5m, 1h30m, 24h)
  :quit               leave
anything else is sent to the assistant";

/// Reads utterances from `input` until EOF or `:quit`, writing replies to `out`.
pub fn run_repl(assistant: &mut Assistant, input: impl BufRead, mut out: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix(':') {
            if !meta_command(assistant, meta, &mut out)? {
                break;
            }
        } else {
            let env = assistant.chat(SESSION, line);
            writeln!(out, "{}", env.reply.text)?;
            if !env.reply.suggestions.is_empty() {
                writeln!(out, "  [{}]", env.reply.suggestions.join("] ["))?;
            }
        }
        out.flush()?;
    }
    // every record is flushed as it is written, so leaving here is always replayable
    Ok(())
}

/// Returns false once the session should end.
fn meta_command(assistant: &mut Assistant, meta: &str, out: &mut impl Write) -> io::Result<bool> {
    let mut words = meta.split_whitespace();
    let cmd = words.next().unwrap_or("");
    let rest: Vec<&str> = words.collect();
    match (cmd, rest.as_slice()) {
        ("quit" | "q", []) => return Ok(false),
        ("devices", []) => {
            for d in assistant.devices() {
                writeln!(out, "{:<12} {:<20} {}", d.id, d.name, d.state)?;
            }
        }
        ("rules", []) => {
            let rules = assistant.rules();
            if rules.is_empty() {
                writeln!(out, "no active rules")?;
            }
            for r in rules {
                writeln!(out, "#{} {}", r.id, r.description)?;
            }
        }
        ("log", args) if args.len() <= 1 => {
            let since = match args.first().map(|s| s.parse::<u64>()) {
                None => 0,
                Some(Ok(n)) => n,
                Some(Err(_)) => {
                    writeln!(out, "{HELP}")?;
                    return Ok(true);
                }
            };
            for e in assistant.log_since(since) {
                writeln!(out, "{e}")?;
            }
        }
        ("advance", args) if !args.is_empty() => match parse_duration(&args.join(" ")) {
            Some(d) => match assistant.advance(d) {
                Ok(now) => writeln!(out, "now {}", now.format("%Y-%m-%d %H:%M:%S"))?,
                Err(e) => writeln!(out, "cannot advance: {e}")?,
            },
            None => writeln!(out, "cannot read duration {:?}", args.join(" "))?,
        },
        _ => writeln!(out, "{HELP}")?,
    }
    Ok(true)
}
