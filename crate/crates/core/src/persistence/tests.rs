use super::*;
use crate::causality::{Actor, Effect};
use crate::dialogue::{run_turn, ConversationState};
use crate::engine::LifecycleState;
use crate::model::{parse_timestamp, CommandKind, DeviceId, StateValue, VirtualClock};
use tempfile::TempDir;

fn registry() -> Registry {
    Registry::from_devices(vec![
        DeviceDescriptor::toggleable("toaster", "toaster"),
        DeviceDescriptor::toggleable("bed", "bedroom light"),
        DeviceDescriptor::toggleable("living", "living room light"),
        DeviceDescriptor::sensor("motion", "motion sensor"),
    ])
    .unwrap()
}

fn ts(s: &str) -> Timestamp {
    parse_timestamp(s).unwrap()
}

fn open(store: &Store, start: Option<&str>) -> Engine {
    let (contents, sink) = store.open_log().unwrap();
    let at = match start {
        Some(s) => ts(s),
        None => contents.clock.unwrap_or_else(|| ts("2024-03-04 07:00")),
    };
    resume_engine(
        registry(),
        SystemClock::Virtual(VirtualClock::new(at)),
        contents,
        sink,
    )
}

fn say(engine: &mut Engine, u: &str) -> String {
    let mut state = ConversationState::new("t");
    run_turn(engine, &mut state, u).text
}

fn on(engine: &Engine, id: &str) -> bool {
    engine.state_of(&DeviceId::new(id)) == Some(StateValue::OnOff(true))
}

#[test]
fn record_round_trip_and_checksum() {
    let line = encode_record("entry", "{\"a\":1}");
    assert!(line.ends_with('\n'));
    let body = line.trim_end_matches('\n');
    assert_eq!(decode_record(body), Some(("entry", "{\"a\":1}")));
    let flipped = body.replace("\"a\":1", "\"a\":2");
    assert_eq!(decode_record(&flipped), None);
    assert_eq!(decode_record("entry\t{}"), None);
}

#[test]
fn registry_errors_name_the_line() {
    let text = "{\"id\":\"a\",\"name\":\"lamp\",\"kind\":\"toggleable\"}\n\nnot json\n";
    assert_eq!(parse_registry(text).unwrap_err().0, 3);
    let dup = "{\"id\":\"a\",\"name\":\"lamp\",\"kind\":\"toggleable\"}\n\
               {\"id\":\"a\",\"name\":\"other\",\"kind\":\"toggleable\"}\n";
    let (line, reason) = parse_registry(dup).unwrap_err();
    assert_eq!(line, 2);
    assert!(reason.contains("duplicate"), "{reason}");
}

#[test]
fn registry_save_load() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    assert!(store.load_registry().unwrap().is_empty());
    store.save_registry(&registry()).unwrap();
    assert_eq!(store.load_registry().unwrap(), registry());
}

#[test]
fn torn_tail_is_dropped_and_overwritten() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    {
        let mut e = open(&store, None);
        say(&mut e, "turn on the toaster");
        say(&mut e, "turn on the bedroom light");
    }
    let path = store.log_path();
    let mut bytes = fs::read(&path).unwrap();
    let intact = bytes.len();
    bytes.extend_from_slice(b"entry\t{\"seq\":3,\"at\":");
    fs::write(&path, &bytes).unwrap();

    let contents = read_log(&path).unwrap();
    assert_eq!(contents.entries.len(), 2);
    assert_eq!(contents.valid_len, intact as u64);
    assert!(contents.discarded.is_some());

    let mut e = open(&store, None);
    say(&mut e, "turn off the toaster");
    drop(e);
    let again = read_log(&path).unwrap();
    assert_eq!(again.entries.len(), 3);
    assert!(again.discarded.is_none());
}

#[test]
fn corrupt_middle_record_stops_reading() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    {
        let mut e = open(&store, None);
        for u in ["turn on the toaster", "turn off the toaster", "turn on the toaster"] {
            say(&mut e, u);
        }
    }
    let path = store.log_path();
    let text = fs::read_to_string(&path).unwrap();
    let broken = text.replacen("\"turn off the toaster\"", "\"turn off the TOASTER\"", 1);
    fs::write(&path, broken).unwrap();
    let contents = read_log(&path).unwrap();
    assert_eq!(contents.entries.len(), 1);
    assert_eq!(contents.discarded.as_ref().unwrap().0, 2);
}

#[test]
fn rules_survive_restart() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    {
        let mut e = open(&store, None);
        say(&mut e, "turn on the toaster every day at 8am");
        say(&mut e, "turn on the bedroom light when the living room light turns on");
        say(&mut e, "turn on the living room light in 5 minutes");
        e.advance_to(ts("2024-03-04 07:02")).unwrap();
    }
    let mut e = open(&store, None);
    assert_eq!(e.now(), ts("2024-03-04 07:02"));
    assert_eq!(e.active_rules().len(), 3);
    assert_eq!(e.observers().len(), 1);
    assert_eq!(e.pending_timers(), 2);
    e.advance_to(ts("2024-03-04 08:00")).unwrap();
    assert!(on(&e, "living"));
    assert!(on(&e, "bed"), "event rule resumed");
    assert!(on(&e, "toaster"), "repeating rule resumed");
    assert_eq!(
        say(&mut e, "why did the toaster turn on"),
        "You told me to turn it on at 8 AM."
    );
}

#[test]
fn device_states_and_ids_resume() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    {
        let mut e = open(&store, None);
        say(&mut e, "turn on the toaster");
    }
    let mut e = open(&store, None);
    assert!(on(&e, "toaster"));
    assert_eq!(e.pending_timers(), 0);
    say(&mut e, "turn on the bedroom light");
    let ids: Vec<u64> = e.commands().map(|c| c.id().0).collect();
    assert_eq!(ids, vec![1, 2]);
    // undo still works for a command created before the restart
    e.undo(crate::model::CommandId(1), "undo").unwrap();
    assert!(!on(&e, "toaster"));
}

#[test]
fn missed_one_shot_is_not_fired() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    {
        let mut e = open(&store, None);
        say(&mut e, "turn on the toaster in 5 minutes");
        say(&mut e, "turn on the bedroom light every day at 7:03 AM");
    }
    let mut e = open(&store, Some("2024-03-04 07:10"));
    let cmd = e.commands().find(|c| c.kind() == CommandKind::Delayed).unwrap();
    assert_eq!(cmd.lifecycle.state, LifecycleState::Completed);
    e.advance_to(ts("2024-03-04 09:00")).unwrap();
    assert!(!on(&e, "toaster"));
    assert!(!on(&e, "bed"), "today's 7:03 was missed");
    e.advance_to(ts("2024-03-05 07:03")).unwrap();
    assert!(on(&e, "bed"));
}

#[test]
fn open_period_resumes_its_end() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    {
        let mut e = open(&store, None);
        say(&mut e, "turn on the toaster every day from 8am to 9am");
        e.advance_to(ts("2024-03-04 08:30")).unwrap();
        assert!(on(&e, "toaster"));
    }
    let mut e = open(&store, None);
    assert!(on(&e, "toaster"));
    e.advance_to(ts("2024-03-04 09:00")).unwrap();
    assert!(!on(&e, "toaster"));
    e.advance_to(ts("2024-03-05 08:00")).unwrap();
    assert!(on(&e, "toaster"));
}

#[test]
fn cancelled_and_rescheduled_rules() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    {
        let mut e = open(&store, None);
        say(&mut e, "turn on the toaster every day at 7:01 AM");
        e.advance_to(ts("2024-03-04 07:05")).unwrap();
        let id = e.active_rules()[0].id();
        e.reschedule(id, chrono::NaiveTime::from_hms_opt(7, 50, 0).unwrap(), "change it")
            .unwrap();
        say(&mut e, "turn on the bedroom light every day at 9pm");
        e.undo(e.last_cancellable().unwrap().id(), "undo").unwrap();
    }
    let e = open(&store, None);
    let active = e.active_rules();
    assert_eq!(active.len(), 1);
    assert_eq!(active[0].fired, 1, "fire count carries over a reschedule");
    assert_eq!(e.next_wakeup(), Some(ts("2024-03-04 07:50")));
}

#[test]
fn replay_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    {
        let mut e = open(&store, None);
        say(&mut e, "turn on the toaster every day at 8am");
        say(&mut e, "turn on the bedroom light from 4pm to 5pm");
        say(&mut e, "turn on the living room light");
        e.advance_to(ts("2024-03-04 16:30")).unwrap();
    }
    let entries = read_log(&store.log_path()).unwrap().entries;
    let now = ts("2024-03-04 16:30");
    let once = replay(&entries, &registry(), now);
    assert_eq!(once, replay(&entries, &registry(), now));

    // restarting without new activity leaves the log, and so the replay, unchanged
    drop(open(&store, None));
    let after = read_log(&store.log_path()).unwrap().entries;
    assert_eq!(after, entries);
    assert_eq!(replay(&after, &registry(), now), once);
}

#[test]
fn unknown_devices_are_skipped() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path()).unwrap();
    {
        let mut e = open(&store, None);
        say(&mut e, "turn on the toaster every day at 8am");
        say(&mut e, "turn on the bedroom light");
    }
    let entries = read_log(&store.log_path()).unwrap().entries;
    let smaller = Registry::from_devices(vec![DeviceDescriptor::toggleable("bed", "bedroom light")])
        .unwrap();
    let boot = replay(&entries, &smaller, ts("2024-03-04 07:00"));
    assert_eq!(boot.commands.len(), 1);
    assert!(boot.pending.is_empty());
    assert_eq!(boot.next_command_id, 3);
    assert!(entries
        .iter()
        .any(|e| matches!(e.effect, Effect::RuleCreated { .. }) && matches!(e.actor, Actor::User { .. })));
}
