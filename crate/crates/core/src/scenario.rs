//! Scripted end-to-end scenarios and golden transcripts.
//!
//! A suite is a text file of scenarios:
//!
//! ```text
//! scenario Delayed action
//! device kitchen | kitchen light | toggleable
//! start 2024-03-04 07:00
//! say turn on the kitchen light in 5 minutes
//! reply Okay, I will turn on the kitchen light in 5 minutes.
//! advance 5m
//! state kitchen on
//! log actions=1 created=1 removed=0
//! end
//! ```
//!
//! Directives: `scenario`, `fixture <file>`, `device <id> | <name> | <kind>
//! [unit]`, `start`, `say`, `reply`, `advance <duration>`, `at <timestamp>`,
//! `state <device> <value>`, `inject <device> <value>`, `log` with any of
//! `actions=` `created=` `removed=`, `fires <device> <count>`,
//! `rules <device> <count>` and `end`. Lines starting with `#` are comments.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration as StdDuration, Instant};

use chrono::Duration;
use thiserror::Error;

use crate::causality::{Actor, CommandLog, Effect, LogEntry};
use crate::engine::Engine;
use crate::model::{
    parse_timestamp, DeviceDescriptor, DeviceId, DeviceKind, Registry, Scalar, StateValue,
    SystemClock, Timestamp, VirtualClock,
};
use crate::persistence::load_registry;
use crate::system::Assistant;

pub const DEFAULT_START: &str = "2024-03-04 07:00";

#[derive(Debug, Error)]
#[error("{file}:{line}: {message}")]
pub struct ParseError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    On,
    Off,
    Number(f64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::On => f.write_str("on"),
            Value::Off => f.write_str("off"),
            Value::Number(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LogShape {
    pub actions: Option<usize>,
    pub created: Option<usize>,
    pub removed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Say(String),
    Reply(String),
    Advance(Duration),
    At(Timestamp),
    State(DeviceId, Value),
    Inject(DeviceId, Value),
    Log(LogShape),
    Fires(DeviceId, usize),
    Rules(DeviceId, usize),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub line: usize,
    pub registry: Registry,
    pub start: Timestamp,
    pub steps: Vec<(usize, Step)>,
}

/// `90s`, `5m`, `1h30m`, `2d`, `5 minutes`.
pub fn parse_duration(s: &str) -> Option<Duration> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let mut total = Duration::zero();
    let mut rest = s.as_str();
    while !rest.is_empty() {
        let digits = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        if digits == 0 {
            return None;
        }
        let n: i64 = rest[..digits].parse().ok()?;
        rest = &rest[digits..];
        let unit_len = rest.find(|c: char| c.is_ascii_digit()).unwrap_or(rest.len());
        let unit = match &rest[..unit_len] {
            "s" | "sec" | "secs" | "second" | "seconds" => Duration::seconds(n),
            "m" | "min" | "mins" | "minute" | "minutes" => Duration::minutes(n),
            "h" | "hour" | "hours" => Duration::hours(n),
            "d" | "day" | "days" => Duration::days(n),
            _ => return None,
        };
        total += unit;
        rest = &rest[unit_len..];
    }
    Some(total)
}

fn parse_value(s: &str) -> Option<Value> {
    match s {
        "on" => Some(Value::On),
        "off" => Some(Value::Off),
        n => n.parse().ok().map(Value::Number),
    }
}

fn parse_kind(s: &str) -> Option<(DeviceKind, Option<String>)> {
    let mut parts = s.split_whitespace();
    let kind = match parts.next()? {
        "toggleable" | "light" | "switch" => DeviceKind::Toggleable,
        "sensor" => DeviceKind::Sensor,
        "thermostat" => DeviceKind::Thermostat,
        _ => return None,
    };
    Some((kind, parts.next().map(str::to_string)))
}

struct Building {
    name: String,
    line: usize,
    devices: Vec<DeviceDescriptor>,
    fixture: Option<Registry>,
    start: Option<Timestamp>,
    steps: Vec<(usize, Step)>,
}

pub fn parse_suite(text: &str, file: &str, base: &Path) -> Result<Vec<Scenario>, ParseError> {
    let err = |line: usize, message: String| ParseError {
        file: file.to_string(),
        line,
        message,
    };
    let mut out = Vec::new();
    let mut cur: Option<Building> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (head, rest) = trimmed
            .split_once(char::is_whitespace)
            .map_or((trimmed, ""), |(h, r)| (h, r.trim()));
        if head == "scenario" {
            if cur.is_some() {
                return Err(err(line, "previous scenario has no `end`".into()));
            }
            if rest.is_empty() {
                return Err(err(line, "scenario needs a name".into()));
            }
            cur = Some(Building {
                name: rest.to_string(),
                line,
                devices: Vec::new(),
                fixture: None,
                start: None,
                steps: Vec::new(),
            });
            continue;
        }
        let Some(b) = cur.as_mut() else {
            return Err(err(line, format!("`{head}` outside a scenario")));
        };
        let device_count = |rest: &str| -> Result<(DeviceId, usize), ParseError> {
            let (d, n) = rest
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| err(line, "expected <device> <count>".into()))?;
            let n = n
                .parse()
                .map_err(|_| err(line, format!("bad count {n:?}")))?;
            Ok((DeviceId::new(d.trim()), n))
        };
        let device_value = |rest: &str| -> Result<(DeviceId, Value), ParseError> {
            let (d, v) = rest
                .split_once(char::is_whitespace)
                .ok_or_else(|| err(line, "expected <device> <value>".into()))?;
            let v = parse_value(v.trim()).ok_or_else(|| err(line, format!("bad value {v:?}")))?;
            Ok((DeviceId::new(d), v))
        };
        let step = match head {
            "end" => {
                let b = cur.take().expect("checked above");
                let mut registry = b.fixture.unwrap_or_default();
                for d in b.devices {
                    registry
                        .insert(d)
                        .map_err(|e| err(b.line, e.to_string()))?;
                }
                if registry.is_empty() {
                    return Err(err(b.line, format!("scenario {:?} has no devices", b.name)));
                }
                out.push(Scenario {
                    name: b.name,
                    line: b.line,
                    registry,
                    start: b
                        .start
                        .unwrap_or_else(|| parse_timestamp(DEFAULT_START).expect("valid")),
                    steps: b.steps,
                });
                continue;
            }
            "fixture" => {
                let path = base.join(rest);
                let reg = load_registry(&path).map_err(|e| err(line, e.to_string()))?;
                b.fixture = Some(reg);
                continue;
            }
            "device" => {
                let parts: Vec<&str> = rest.split('|').map(str::trim).collect();
                let [id, name, kind] = parts.as_slice() else {
                    return Err(err(line, "expected `device <id> | <name> | <kind>`".into()));
                };
                let (kind, unit) =
                    parse_kind(kind).ok_or_else(|| err(line, format!("unknown kind {kind:?}")))?;
                let d = match kind {
                    DeviceKind::Toggleable => DeviceDescriptor::toggleable(*id, *name),
                    DeviceKind::Sensor => DeviceDescriptor::sensor(*id, *name),
                    DeviceKind::Thermostat => {
                        DeviceDescriptor::thermostat(*id, *name, unit.as_deref().unwrap_or("degrees"))
                    }
                };
                b.devices.push(d);
                continue;
            }
            "start" => {
                b.start = Some(parse_timestamp(rest).map_err(|e| err(line, e.to_string()))?);
                continue;
            }
            "say" => Step::Say(rest.to_string()),
            "reply" => Step::Reply(rest.to_string()),
            "advance" => Step::Advance(
                parse_duration(rest).ok_or_else(|| err(line, format!("bad duration {rest:?}")))?,
            ),
            "at" => Step::At(parse_timestamp(rest).map_err(|e| err(line, e.to_string()))?),
            "state" => {
                let (d, v) = device_value(rest)?;
                Step::State(d, v)
            }
            "inject" => {
                let (d, v) = device_value(rest)?;
                Step::Inject(d, v)
            }
            "fires" => {
                let (d, n) = device_count(rest)?;
                Step::Fires(d, n)
            }
            "rules" => {
                let (d, n) = device_count(rest)?;
                Step::Rules(d, n)
            }
            "log" => {
                let mut shape = LogShape::default();
                for kv in rest.split_whitespace() {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| err(line, format!("expected key=count, got {kv:?}")))?;
                    let n: usize = v.parse().map_err(|_| err(line, format!("bad count {v:?}")))?;
                    match k {
                        "actions" => shape.actions = Some(n),
                        "created" => shape.created = Some(n),
                        "removed" => shape.removed = Some(n),
                        _ => return Err(err(line, format!("unknown log key {k:?}"))),
                    }
                }
                Step::Log(shape)
            }
            other => return Err(err(line, format!("unknown directive {other:?}"))),
        };
        b.steps.push((line, step));
    }
    if let Some(b) = cur {
        return Err(err(b.line, format!("scenario {:?} has no `end`", b.name)));
    }
    Ok(out)
}

pub fn load_suite(path: &Path) -> Result<Vec<Scenario>, ParseError> {
    let text = std::fs::read_to_string(path).map_err(|e| ParseError {
        file: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    parse_suite(&text, &path.display().to_string(), &base)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub line: usize,
    pub what: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub name: String,
    pub failures: Vec<Failure>,
    pub elapsed: StdDuration,
    /// Every turn as `> utterance` / `< reply` lines.
    pub transcript: Vec<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.elapsed.as_secs_f64() * 1000.0;
        if self.passed() {
            return write!(f, "PASS {} ({ms:.1} ms)", self.name);
        }
        write!(f, "FAIL {} ({ms:.1} ms)", self.name)?;
        for x in &self.failures {
            write!(
                f,
                "\n  line {}: {}\n    expected: {}\n    actual:   {}",
                x.line, x.what, x.expected, x.actual
            )?;
        }
        Ok(())
    }
}

fn fresh(registry: Registry, start: Timestamp) -> Assistant {
    let clock = SystemClock::Virtual(VirtualClock::new(start));
    Assistant::new(Engine::new(registry, clock, CommandLog::new()))
}

fn to_state(v: &Value, current: Option<&StateValue>) -> StateValue {
    match v {
        Value::On => StateValue::OnOff(true),
        Value::Off => StateValue::OnOff(false),
        Value::Number(n) => {
            let unit = match current {
                Some(StateValue::Scalar(s)) => s.unit.clone(),
                _ => String::new(),
            };
            StateValue::Scalar(Scalar::new(*n, unit))
        }
    }
}

fn matches_value(v: &Value, state: &StateValue) -> bool {
    match (v, state) {
        (Value::On, StateValue::OnOff(b)) => *b,
        (Value::Off, StateValue::OnOff(b)) => !*b,
        (Value::Number(n), StateValue::Scalar(s)) => (s.value - n).abs() < 1e-9,
        _ => false,
    }
}

pub fn log_shape(entries: &[LogEntry]) -> LogShape {
    let count = |f: fn(&Effect) -> bool| Some(entries.iter().filter(|e| f(&e.effect)).count());
    LogShape {
        actions: count(|e| matches!(e, Effect::ActionPerformed { .. })),
        created: count(|e| matches!(e, Effect::RuleCreated { .. })),
        removed: count(|e| matches!(e, Effect::RuleRemoved { .. })),
    }
}

fn shape_text(s: &LogShape) -> String {
    let mut parts = Vec::new();
    for (k, v) in [("actions", s.actions), ("created", s.created), ("removed", s.removed)] {
        if let Some(n) = v {
            parts.push(format!("{k}={n}"));
        }
    }
    parts.join(" ")
}

/// Runs one scenario against a fresh engine on a virtual clock.
pub fn run_scenario(s: &Scenario) -> ScenarioReport {
    let began = Instant::now();
    let mut a = fresh(s.registry.clone(), s.start);
    let mut failures = Vec::new();
    let mut transcript = Vec::new();
    let mut last_reply: Option<String> = None;
    let mut fail = |line: usize, what: &str, expected: String, actual: String| {
        failures.push(Failure {
            line,
            what: what.to_string(),
            expected,
            actual,
        })
    };
    for (line, step) in &s.steps {
        let line = *line;
        match step {
            Step::Say(u) => {
                let env = a.chat("scenario", u);
                transcript.push(format!("> {u}"));
                transcript.push(format!("< {}", env.reply.text));
                last_reply = Some(env.reply.text);
            }
            Step::Reply(expected) => {
                let actual = last_reply.take().unwrap_or_else(|| "(no reply)".into());
                if &actual != expected {
                    fail(line, "reply", expected.clone(), actual);
                }
            }
            Step::Advance(d) => {
                if let Err(e) = a.advance(*d) {
                    fail(line, "advance", "ok".into(), e.to_string());
                }
            }
            Step::At(t) => {
                if *t < a.now() {
                    fail(line, "at", format!("a time after {}", a.now()), t.to_string());
                } else if let Err(e) = a.engine_mut().advance_to(*t) {
                    fail(line, "at", "ok".into(), e.to_string());
                }
            }
            Step::State(d, v) => match a.engine().state_of(d) {
                Some(st) if matches_value(v, &st) => {}
                Some(st) => fail(line, &format!("state of {d}"), v.to_string(), st.to_string()),
                None => fail(line, "state", format!("device {d}"), "unknown device".into()),
            },
            Step::Inject(d, v) => {
                let value = to_state(v, a.engine().state_of(d).as_ref());
                if let Err(e) = a.set_device_state(d, value) {
                    fail(line, "inject", "ok".into(), e.to_string());
                }
            }
            Step::Log(expected) => {
                let got = log_shape(a.engine().log_entries());
                let mismatch = [
                    (expected.actions, got.actions),
                    (expected.created, got.created),
                    (expected.removed, got.removed),
                ]
                .iter()
                .any(|(e, g)| e.is_some() && e != g);
                if mismatch {
                    let shown = LogShape {
                        actions: expected.actions.and(got.actions),
                        created: expected.created.and(got.created),
                        removed: expected.removed.and(got.removed),
                    };
                    fail(line, "log shape", shape_text(expected), shape_text(&shown));
                }
            }
            Step::Fires(d, n) => {
                let got = a
                    .engine()
                    .log_entries()
                    .iter()
                    .filter(|e| !matches!(e.actor, Actor::User { .. }))
                    .filter(|e| e.performed().is_some_and(|(act, _, _)| &act.device_id == d))
                    .count();
                if got != *n {
                    fail(line, &format!("rule fires on {d}"), n.to_string(), got.to_string());
                }
            }
            Step::Rules(d, n) => {
                let got = a.engine().active_rules_for(d).len();
                if got != *n {
                    fail(line, &format!("active rules on {d}"), n.to_string(), got.to_string());
                }
            }
        }
    }
    ScenarioReport {
        name: s.name.clone(),
        failures,
        elapsed: began.elapsed(),
        transcript,
    }
}

pub fn run_suite(scenarios: &[Scenario]) -> Vec<ScenarioReport> {
    scenarios.iter().map(run_scenario).collect()
}

/// Plays the `> ` lines of a golden transcript through `assistant` and
/// renders the conversation in the same format. Other lines are ignored.
pub fn play_transcript(assistant: &mut Assistant, golden: &str) -> String {
    let mut out = String::new();
    for line in golden.lines() {
        if let Some(u) = line.strip_prefix("> ") {
            let env = assistant.chat("transcript", u);
            out.push_str(&format!("> {u}\n< {}\n", env.reply.text));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUITE: &str = "\
# a comment
scenario delayed
device kitchen | kitchen light | toggleable
say turn on the kitchen light in 5 minutes
reply Okay, I will turn on the kitchen light in 5 minutes.
advance 4m
state kitchen off
advance 1m
state kitchen on
fires kitchen 1
log actions=1 created=1 removed=0
end
";

    fn suite(text: &str) -> Vec<Scenario> {
        parse_suite(text, "t.scn", Path::new(".")).unwrap()
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration("5m"), Some(Duration::minutes(5)));
        assert_eq!(parse_duration("1h30m"), Some(Duration::minutes(90)));
        assert_eq!(parse_duration("24h"), Some(Duration::days(1)));
        assert_eq!(parse_duration("5 minutes"), Some(Duration::minutes(5)));
        assert_eq!(parse_duration("m"), None);
        assert_eq!(parse_duration("3 fortnights"), None);
    }

    #[test]
    fn passing_scenario() {
        let r = run_scenario(&suite(SUITE)[0]);
        assert!(r.passed(), "{r}");
        assert_eq!(r.transcript.len(), 2);
    }

    #[test]
    fn corrupted_expectation_fails_with_diff() {
        let broken = SUITE.replace("state kitchen on", "state kitchen off");
        let r = run_scenario(&suite(&broken)[0]);
        assert!(!r.passed());
        let text = r.to_string();
        assert!(text.starts_with("FAIL delayed"), "{text}");
        assert!(text.contains("line 9: state of kitchen"), "{text}");
        assert!(text.contains("expected: off") && text.contains("actual:   on"), "{text}");

        let wrong_reply = SUITE.replace("in 5 minutes.", "in 6 minutes.");
        let r = run_scenario(&suite(&wrong_reply)[0]);
        assert_eq!(r.failures[0].line, 5);
        assert_eq!(r.failures[0].actual, "Okay, I will turn on the kitchen light in 5 minutes.");
    }

    #[test]
    fn parse_errors_carry_location() {
        let e = parse_suite("scenario x\nfrobnicate\nend\n", "bad.scn", Path::new(".")).unwrap_err();
        assert_eq!((e.file.as_str(), e.line), ("bad.scn", 2));
        let e = parse_suite("scenario x\ndevice a | b\nend\n", "bad.scn", Path::new(".")).unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_suite("scenario x\ndevice a | b | light\n", "bad.scn", Path::new(".")).unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.to_string().starts_with("bad.scn:1:"));
        assert!(parse_suite("say hi\n", "f", Path::new(".")).is_err());
    }

    #[test]
    fn transcript_playback() {
        let reg = Registry::from_devices(vec![DeviceDescriptor::toggleable("t", "toaster")]).unwrap();
        let mut a = fresh(reg, parse_timestamp(DEFAULT_START).unwrap());
        let out = play_transcript(&mut a, "> turn on the toaster\n< ignored\n");
        assert_eq!(out, "> turn on the toaster\n< Okay, turning on the toaster.\n");
    }
}
