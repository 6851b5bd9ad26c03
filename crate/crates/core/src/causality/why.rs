use serde::{Deserialize, Serialize};

use super::{Actor, Effect, LogEntry};
use crate::model::{Action, CommandId, CommandSpec, Condition, StateValue, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausePolicy {
    /// Among candidates in the current run, the one that happened first.
    EarliestCause,
    /// Among candidates in the current run, the most recent one.
    LatestCause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalAnswer {
    pub condition: Condition,
    /// Most immediate cause first.
    pub chain: Vec<LogEntry>,
    pub policy: CausePolicy,
    /// The chain ends at a user command.
    pub exhausted: bool,
}

impl CausalAnswer {
    pub fn manifesting(&self) -> &LogEntry {
        &self.chain[0]
    }

    pub fn root(&self) -> &LogEntry {
        self.chain.last().expect("chain is non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoCause;

/// Whether performing `action` can leave its device satisfying `cond`.
pub fn action_could_cause(action: &Action, cond: &Condition) -> bool {
    if action.device_id != cond.device_id {
        return false;
    }
    let result = action.apply(&StateValue::OnOff(false));
    cond.holds(&result).unwrap_or(false)
}

/// True iff any action of the command (both halves of a period pair) could
/// make `cond` true.
pub fn could_have_caused(cmd: &CommandSpec, cond: &Condition) -> bool {
    cmd.actions().any(|a| action_could_cause(a, cond))
}

fn find_seq(log: &[LogEntry], seq: u64) -> Option<&LogEntry> {
    log.binary_search_by_key(&seq, |e| e.seq)
        .ok()
        .map(|i| &log[i])
}

fn rule_creation(log: &[LogEntry], command: CommandId, before: u64) -> Option<&LogEntry> {
    log.iter()
        .rev()
        .filter(|e| e.seq < before)
        .find(|e| matches!(&e.effect, Effect::RuleCreated { command: spec, .. } if spec.id == command))
}

pub fn resolve_why(
    cond: &Condition,
    log: &[LogEntry],
    query_time: Timestamp,
) -> Result<CausalAnswer, NoCause> {
    resolve_why_with(cond, log, query_time, CausePolicy::EarliestCause)
}

pub fn resolve_why_with(
    cond: &Condition,
    log: &[LogEntry],
    query_time: Timestamp,
    policy: CausePolicy,
) -> Result<CausalAnswer, NoCause> {
    let on_device: Vec<(&LogEntry, &Action, &StateValue)> = log
        .iter()
        .filter(|e| e.at <= query_time)
        .filter_map(|e| e.performed().map(|(a, _, new)| (e, a, new)))
        .filter(|(_, a, _)| a.device_id == cond.device_id)
        .collect();
    let holds = |v: &StateValue| cond.holds(v).unwrap_or(false);

    // The most recent entry that left the condition true, then the run of
    // satisfying entries back to the last contrary transition.
    let last = on_device
        .iter()
        .rposition(|(_, _, new)| holds(new))
        .ok_or(NoCause)?;
    let run_start = on_device[..=last]
        .iter()
        .rposition(|(_, _, new)| !holds(new))
        .map_or(0, |i| i + 1);
    let mut candidates = on_device[run_start..=last]
        .iter()
        .filter(|(_, a, _)| action_could_cause(a, cond))
        .map(|(e, _, _)| *e);
    let manifesting = match policy {
        CausePolicy::EarliestCause => candidates.next(),
        CausePolicy::LatestCause => candidates.next_back(),
    }
    .ok_or(NoCause)?;

    let mut chain = vec![manifesting.clone()];
    let mut exhausted = false;
    let mut current = manifesting;
    loop {
        let next = match &current.actor {
            Actor::User { .. } => {
                exhausted = true;
                None
            }
            Actor::Rule { command } => rule_creation(log, *command, current.seq),
            Actor::Event { trigger, .. } => trigger.caused_by.and_then(|s| find_seq(log, s)),
        };
        match next {
            // seqs strictly decrease along the chain, so this terminates
            Some(e) if e.seq < current.seq => {
                chain.push(e.clone());
                current = e;
            }
            _ => break,
        }
    }
    Ok(CausalAnswer {
        condition: cond.clone(),
        chain,
        policy,
        exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causality::{CommandLog, Trigger};
    use crate::model::{parse_timestamp, DeviceId, Predicate, TimeSpec};
    use chrono::NaiveTime;

    fn t(s: &str) -> Timestamp {
        parse_timestamp(s).unwrap()
    }

    fn on(dev: &str) -> Action {
        Action::turn_on(DeviceId::new(dev))
    }

    fn perform(log: &mut CommandLog, at: &str, actor: Actor, action: Action, old: bool, new: bool) -> u64 {
        log.append(
            t(at),
            actor,
            Effect::ActionPerformed {
                action,
                old: StateValue::OnOff(old),
                new: StateValue::OnOff(new),
            },
        )
        .unwrap()
        .seq
    }

    fn create(log: &mut CommandLog, at: &str, id: u64, action: Action, time: Option<TimeSpec>) -> u64 {
        let spec = CommandSpec::new(CommandId(id), action, time, None, "u", t(at)).unwrap();
        log.append(
            t(at),
            Actor::User {
                utterance: "u".into(),
                command: CommandId(id),
            },
            Effect::RuleCreated {
                command: spec,
                snapshot: StateValue::OnOff(false),
            },
        )
        .unwrap()
        .seq
    }

    fn became_on(dev: &str) -> Condition {
        Condition::new(DeviceId::new(dev), Predicate::BecameOn)
    }

    fn daily(h: u32, m: u32) -> Option<TimeSpec> {
        Some(TimeSpec::DailyAt(NaiveTime::from_hms_opt(h, m, 0).unwrap()))
    }

    #[test]
    fn could_have_caused_cases() {
        let toaster = CommandSpec::new(CommandId(1), on("toaster"), None, None, "u", t("2024-01-01 00:00")).unwrap();
        assert!(could_have_caused(&toaster, &became_on("toaster")));
        assert!(!could_have_caused(&toaster, &became_on("light")));
        let period = CommandSpec::new(
            CommandId(2),
            on("light"),
            Some(TimeSpec::Period {
                start: t("2024-01-01 16:00"),
                end: t("2024-01-01 17:00"),
            }),
            None,
            "u",
            t("2024-01-01 00:00"),
        )
        .unwrap();
        let off = Condition::new(DeviceId::new("light"), Predicate::BecameOff);
        // Oracle: check each half of the pair separately.
        let by_hand = [period.action.kind, period.paired.as_ref().unwrap().kind]
            .contains(&crate::model::ActionKind::TurnOff);
        assert!(by_hand);
        assert!(could_have_caused(&period, &off));
    }

    #[test]
    fn toaster_daily_rule() {
        let mut log = CommandLog::new();
        let created = create(&mut log, "2024-03-04 07:00", 1, on("toaster"), daily(8, 0));
        let fire = perform(&mut log, "2024-03-04 08:00", Actor::Rule { command: CommandId(1) }, on("toaster"), false, true);
        let ans = resolve_why(&became_on("toaster"), log.entries(), t("2024-03-04 08:05")).unwrap();
        let seqs: Vec<u64> = ans.chain.iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![fire, created]);
        assert!(ans.exhausted);
    }

    #[test]
    fn never_on_is_no_cause() {
        let log = CommandLog::new();
        assert_eq!(
            resolve_why(&became_on("toaster"), log.entries(), t("2024-03-04 08:05")),
            Err(NoCause)
        );
    }

    #[test]
    fn event_chain_reaches_user_root() {
        let mut log = CommandLog::new();
        let daily_created = create(&mut log, "2024-03-04 08:00", 1, on("living"), daily(9, 0));
        let living_fire = perform(&mut log, "2024-03-04 09:00", Actor::Rule { command: CommandId(1) }, on("living"), false, true);
        let bed_fire = perform(
            &mut log,
            "2024-03-04 09:00",
            Actor::Event {
                command: CommandId(2),
                trigger: Trigger {
                    device: DeviceId::new("living"),
                    seq: 1,
                    old: StateValue::OnOff(false),
                    new: StateValue::OnOff(true),
                    caused_by: Some(living_fire),
                },
            },
            on("bed"),
            false,
            true,
        );
        let ans = resolve_why(&became_on("bed"), log.entries(), t("2024-03-04 09:05")).unwrap();
        let seqs: Vec<u64> = ans.chain.iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![bed_fire, living_fire, daily_created]);
        assert!(ans.exhausted);
    }

    #[test]
    fn earliest_of_two_rules() {
        let mut log = CommandLog::new();
        create(&mut log, "2024-03-04 06:00", 1, on("light"), daily(7, 0));
        create(&mut log, "2024-03-04 06:00", 2, on("light"), daily(7, 30));
        let first = perform(&mut log, "2024-03-04 07:00", Actor::Rule { command: CommandId(1) }, on("light"), false, true);
        let second = perform(&mut log, "2024-03-04 07:30", Actor::Rule { command: CommandId(2) }, on("light"), true, true);
        let q = t("2024-03-04 08:00");

        // Oracle: replay and mark the first entry after which the light stayed on.
        let mut run_start = None;
        for e in log.entries() {
            if let Some((a, _, new)) = e.performed() {
                if a.device_id.as_str() == "light" {
                    if new.is_on() == Some(true) {
                        run_start.get_or_insert(e.seq);
                    } else {
                        run_start = None;
                    }
                }
            }
        }
        assert_eq!(run_start, Some(first));

        let ans = resolve_why(&became_on("light"), log.entries(), q).unwrap();
        assert_eq!(ans.manifesting().seq, first);
        let latest = resolve_why_with(&became_on("light"), log.entries(), q, CausePolicy::LatestCause).unwrap();
        assert_eq!(latest.manifesting().seq, second);
    }

    #[test]
    fn contrary_transition_resets_window() {
        let mut log = CommandLog::new();
        let u = |c| Actor::User { utterance: "u".into(), command: CommandId(c) };
        perform(&mut log, "2024-03-04 07:00", u(1), on("light"), false, true);
        perform(&mut log, "2024-03-04 07:10", u(2), Action::turn_off(DeviceId::new("light")), true, false);
        let again = perform(&mut log, "2024-03-04 07:20", u(3), on("light"), false, true);
        let ans = resolve_why(&became_on("light"), log.entries(), t("2024-03-04 08:00")).unwrap();
        assert_eq!(ans.manifesting().seq, again);
        // Queried before the second "on": the first run is reported.
        let ans = resolve_why(&became_on("light"), log.entries(), t("2024-03-04 07:15")).unwrap();
        assert_eq!(ans.manifesting().seq, 1);
    }

    #[test]
    fn external_trigger_ends_chain() {
        let mut log = CommandLog::new();
        let fire = perform(
            &mut log,
            "2024-03-04 10:00",
            Actor::Event {
                command: CommandId(1),
                trigger: Trigger {
                    device: DeviceId::new("sensor"),
                    seq: 1,
                    old: StateValue::OnOff(false),
                    new: StateValue::OnOff(true),
                    caused_by: None,
                },
            },
            on("light"),
            false,
            true,
        );
        let ans = resolve_why(&became_on("light"), log.entries(), t("2024-03-04 10:01")).unwrap();
        assert_eq!(ans.chain.len(), 1);
        assert_eq!(ans.chain[0].seq, fire);
        assert!(!ans.exhausted);
    }
}
