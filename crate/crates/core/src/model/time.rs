use chrono::{Duration, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Timezone-free local civil time.
pub type Timestamp = NaiveDateTime;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSpec {
    Instant(Timestamp),
    /// Seconds from command creation.
    Delay(u64),
    DailyAt(NaiveTime),
    DailyPeriod { start: NaiveTime, end: NaiveTime },
    Period { start: Timestamp, end: Timestamp },
}

impl TimeSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            TimeSpec::Delay(0) => Err(ModelError::InvalidTime("delay must be positive".into())),
            TimeSpec::Period { start, end } if start >= end => Err(ModelError::InvalidTime(
                "period start must precede its end".into(),
            )),
            TimeSpec::DailyPeriod { start, end } if start == end => Err(ModelError::InvalidTime(
                "daily period start and end must differ".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, TimeSpec::DailyPeriod { .. } | TimeSpec::Period { .. })
    }
}

/// First timestamp strictly after `after` whose time of day is `at`.
pub fn next_occurrence(after: Timestamp, at: NaiveTime) -> Timestamp {
    let same_day = after.date().and_time(at);
    if same_day > after {
        same_day
    } else {
        same_day + Duration::days(1)
    }
}

/// Accepts `YYYY-MM-DD HH:MM[:SS]` with a space or `T` separator.
pub fn parse_timestamp(s: &str) -> Result<Timestamp, ModelError> {
    let s = s.trim();
    for fmt in [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    Err(ModelError::InvalidTime(format!("unparseable timestamp {s:?}")))
}

fn twelve_hour(t: NaiveTime) -> (u32, &'static str) {
    let (pm, h) = t.hour12();
    (h, if pm { "PM" } else { "AM" })
}

/// `8 AM`, `7:50 AM`.
pub fn format_time_short(t: NaiveTime) -> String {
    let (h, suffix) = twelve_hour(t);
    if t.minute() == 0 {
        format!("{h} {suffix}")
    } else {
        format!("{h}:{:02} {suffix}", t.minute())
    }
}

/// `8:00 AM`.
pub fn format_time_long(t: NaiveTime) -> String {
    let (h, suffix) = twelve_hour(t);
    format!("{h}:{:02} {suffix}", t.minute())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hm(h: u32, m: u32) -> NaiveTime {
        NaiveTime::from_hms_opt(h, m, 0).unwrap()
    }

    #[test]
    fn strictly_after() {
        let t = parse_timestamp("2024-03-04 17:30").unwrap();
        assert_eq!(
            next_occurrence(t, hm(17, 0)),
            parse_timestamp("2024-03-05 17:00").unwrap()
        );
        assert_eq!(
            next_occurrence(t, hm(18, 0)),
            parse_timestamp("2024-03-04 18:00").unwrap()
        );
        let exact = parse_timestamp("2024-03-04 17:00").unwrap();
        assert_eq!(
            next_occurrence(exact, hm(17, 0)),
            parse_timestamp("2024-03-05 17:00").unwrap()
        );
    }

    #[test]
    fn formatting() {
        assert_eq!(format_time_short(hm(8, 0)), "8 AM");
        assert_eq!(format_time_short(hm(7, 50)), "7:50 AM");
        assert_eq!(format_time_short(hm(0, 0)), "12 AM");
        assert_eq!(format_time_short(hm(12, 5)), "12:05 PM");
        assert_eq!(format_time_long(hm(8, 0)), "8:00 AM");
        assert_eq!(format_time_long(hm(17, 0)), "5:00 PM");
    }

    #[test]
    fn invariants() {
        assert!(TimeSpec::Delay(0).validate().is_err());
        assert!(TimeSpec::Delay(1).validate().is_ok());
        let a = parse_timestamp("2024-01-01 10:00").unwrap();
        assert!(TimeSpec::Period { start: a, end: a }.validate().is_err());
        assert!(TimeSpec::DailyPeriod {
            start: hm(1, 0),
            end: hm(1, 0)
        }
        .validate()
        .is_err());
    }
}
