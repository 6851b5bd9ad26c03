//! Canonical English renderings of commands.

use crate::model::{
    format_time_long, ActionKind, CommandSpec, Condition, Direction, Predicate, Registry,
    TimeSpec,
};
use crate::model::Action;

pub fn format_duration(secs: u64) -> String {
    let plural = |n: u64, unit: &str| {
        if n == 1 {
            format!("1 {unit}")
        } else {
            format!("{n} {unit}s")
        }
    };
    let (h, m, s) = (secs / 3600, (secs % 3600) / 60, secs % 60);
    let mut parts = Vec::new();
    if h > 0 {
        parts.push(plural(h, "hour"));
    }
    if m > 0 {
        parts.push(plural(m, "minute"));
    }
    if s > 0 || parts.is_empty() {
        parts.push(plural(s, "second"));
    }
    parts.join(" ")
}

/// `turn on the bedroom light`
pub fn action_phrase(action: &Action, registry: &Registry) -> String {
    let name = registry.name_of(&action.device_id);
    match action.kind {
        ActionKind::TurnOn => format!("turn on the {name}"),
        ActionKind::TurnOff => format!("turn off the {name}"),
        ActionKind::SetValue => match &action.argument {
            Some(v) => format!("set the {name} to {v}"),
            None => format!("set the {name}"),
        },
    }
}

/// `turns on`, `is activated`, `goes above 20`
pub fn predicate_phrase(predicate: &Predicate) -> String {
    match predicate {
        Predicate::BecameOn => "turns on".into(),
        Predicate::BecameOff => "turns off".into(),
        Predicate::Activated => "is activated".into(),
        Predicate::CrossedThreshold {
            direction: Direction::Up,
            threshold,
        } => format!("goes above {}", crate::model::Scalar::new(*threshold, "")),
        Predicate::CrossedThreshold {
            direction: Direction::Down,
            threshold,
        } => format!("goes below {}", crate::model::Scalar::new(*threshold, "")),
    }
}

pub fn condition_phrase(cond: &Condition, registry: &Registry) -> String {
    format!(
        "the {} {}",
        registry.name_of(&cond.device_id),
        predicate_phrase(&cond.predicate)
    )
}

fn time_phrase(spec: &CommandSpec) -> String {
    match &spec.time {
        None => String::new(),
        Some(TimeSpec::Instant(t)) => format!(" at {}", format_time_long(t.time())),
        Some(TimeSpec::Delay(secs)) => {
            let at = spec.created_at + chrono::Duration::seconds(*secs as i64);
            format!(" at {}", format_time_long(at.time()))
        }
        Some(TimeSpec::Period { start, end }) => format!(
            " from {} to {}",
            format_time_long(start.time()),
            format_time_long(end.time())
        ),
        Some(TimeSpec::DailyAt(t)) => format!(" every day at {}", format_time_long(*t)),
        Some(TimeSpec::DailyPeriod { start, end }) => format!(
            " every day from {} to {}",
            format_time_long(*start),
            format_time_long(*end)
        ),
    }
}

/// `turn on the bedroom light every day at 8:00 AM`
pub fn describe(spec: &CommandSpec, registry: &Registry) -> String {
    let mut out = action_phrase(&spec.action, registry);
    out.push_str(&time_phrase(spec));
    if let Some(cond) = &spec.trigger {
        out.push_str(" when ");
        out.push_str(&condition_phrase(cond, registry));
    }
    out
}

/// Capitalized sentence form of [`describe`].
pub fn describe_sentence(spec: &CommandSpec, registry: &Registry) -> String {
    let mut s = capitalize(&describe(spec, registry));
    s.push('.');
    s
}

pub fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_timestamp, CommandId, DeviceDescriptor};
    use chrono::NaiveTime;

    #[test]
    fn daily_rule_sentence() {
        let registry =
            Registry::from_devices(vec![DeviceDescriptor::toggleable("bed", "bedroom light")])
                .unwrap();
        let spec = CommandSpec::new(
            CommandId(1),
            Action::turn_on("bed".into()),
            Some(TimeSpec::DailyAt(NaiveTime::from_hms_opt(8, 0, 0).unwrap())),
            None,
            "turn on the bedroom light everyday at 8am",
            parse_timestamp("2024-03-04 07:00").unwrap(),
        )
        .unwrap();
        assert_eq!(
            describe_sentence(&spec, &registry),
            "Turn on the bedroom light every day at 8:00 AM."
        );
    }

    #[test]
    fn durations() {
        assert_eq!(format_duration(300), "5 minutes");
        assert_eq!(format_duration(60), "1 minute");
        assert_eq!(format_duration(5400), "1 hour 30 minutes");
        assert_eq!(format_duration(7), "7 seconds");
    }
}
