//! Wires clock, engine, dialogue and store into one assistant with sessions
//! and an event stream for live views.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use thiserror::Error;

use crate::bus::{Payload, QueueId, QueueKind};
use crate::causality::{CommandLog, LogEntry};
use crate::dialogue::{run_turn, ConversationState, Reply};
use crate::engine::describe::describe_sentence;
use crate::engine::{Engine, EngineError, LifecycleState};
use crate::model::{
    ActionKind, Clock, CommandId, CommandKind, DeviceId, DeviceKind, Registry, StateValue,
    SystemClock, Timestamp, VirtualClock, WallClock,
};
use crate::persistence::{load_registry, resume_engine, PersistError, Store};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("no devices configured; pass a device registry file")]
    NoDevices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockMode {
    #[default]
    Virtual,
    Wall,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    /// Directory holding `devices.jsonl` and `command.log`. Without one,
    /// nothing is persisted.
    pub data_dir: Option<PathBuf>,
    /// Registry file that replaces the one in the data directory.
    pub devices: Option<PathBuf>,
    pub clock: ClockMode,
    /// Virtual clock start. A resumed log never moves the clock backwards.
    pub start: Option<Timestamp>,
}

/// One record on the live stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum StreamEvent {
    Reply {
        session_id: String,
        turn_seq: u64,
        utterance: String,
        text: String,
        end_of_exchange: bool,
        suggestions: Vec<String>,
    },
    StateChange {
        device: DeviceId,
        old: StateValue,
        new: StateValue,
        at: Timestamp,
    },
    LogAppend {
        entry: Box<LogEntry>,
    },
    Clock {
        now: Timestamp,
        #[serde(rename = "virtual")]
        is_virtual: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionEnvelope {
    pub session_id: String,
    pub utterance: String,
    pub reply: Reply,
    pub turn_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceView {
    pub id: DeviceId,
    pub name: String,
    pub kind: DeviceKind,
    pub supported_actions: Vec<ActionKind>,
    pub state: StateValue,
    pub updated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleView {
    pub id: CommandId,
    pub kind: CommandKind,
    pub device: DeviceId,
    pub description: String,
    pub created_by: String,
    pub state: LifecycleState,
}

#[derive(Debug, Default)]
struct Session {
    state: ConversationState,
    turn_seq: u64,
}

pub struct Assistant {
    engine: Engine,
    sessions: BTreeMap<String, Session>,
    changes: Arc<Mutex<Vec<StreamEvent>>>,
    replies: Vec<StreamEvent>,
    // last log seq already put on the stream
    streamed: u64,
}

impl Assistant {
    pub fn new(engine: Engine) -> Self {
        let changes: Arc<Mutex<Vec<StreamEvent>>> = Arc::default();
        let sink = changes.clone();
        engine.bus().tap(move |m| {
            let Payload::StateChange { old, new, .. } = &m.payload else {
                return;
            };
            if !matches!(QueueId::parse(m.queue.as_str()), Ok((_, QueueKind::Events))) {
                return;
            }
            sink.lock().unwrap().push(StreamEvent::StateChange {
                device: new.device_id.clone(),
                old: old.value.clone(),
                new: new.value.clone(),
                at: m.at,
            });
        });
        let streamed = engine.log().entries().last().map_or(0, |e| e.seq);
        Self {
            engine,
            sessions: BTreeMap::new(),
            changes,
            replies: Vec::new(),
            streamed,
        }
    }

    /// Builds the registry, clock and engine described by `config`, resuming
    /// from the data directory's log when there is one.
    pub fn open(config: &Config) -> Result<Self, SystemError> {
        let store = config.data_dir.as_ref().map(Store::open).transpose()?;
        let registry = match (&config.devices, &store) {
            (Some(path), _) => load_registry(path)?,
            (None, Some(store)) => store.load_registry()?,
            (None, None) => Registry::new(),
        };
        if registry.is_empty() {
            return Err(SystemError::NoDevices);
        }
        let Some(store) = store else {
            let clock = make_clock(config, None);
            return Ok(Self::new(Engine::new(registry, clock, CommandLog::new())));
        };
        if config.devices.is_some() {
            store.save_registry(&registry)?;
        }
        let (contents, sink) = store.open_log()?;
        let clock = make_clock(config, contents.clock);
        Ok(Self::new(resume_engine(registry, clock, contents, sink)))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn registry(&self) -> &Registry {
        self.engine.registry()
    }

    pub fn now(&self) -> Timestamp {
        self.engine.now()
    }

    /// Runs one turn. Unknown sessions are created on first use.
    pub fn chat(&mut self, session_id: &str, utterance: &str) -> SessionEnvelope {
        self.engine.run_due();
        let session = self
            .sessions
            .entry(session_id.to_string())
            .or_insert_with(|| Session {
                state: ConversationState::new(session_id),
                turn_seq: 0,
            });
        session.turn_seq += 1;
        let turn_seq = session.turn_seq;
        let reply = run_turn(&mut self.engine, &mut session.state, utterance);
        self.replies.push(StreamEvent::Reply {
            session_id: session_id.to_string(),
            turn_seq,
            utterance: utterance.to_string(),
            text: reply.text.clone(),
            end_of_exchange: reply.end_of_exchange,
            suggestions: reply.suggestions.clone(),
        });
        SessionEnvelope {
            session_id: session_id.to_string(),
            utterance: utterance.to_string(),
            reply,
            turn_seq,
        }
    }

    pub fn conversation(&self, session_id: &str) -> Option<&ConversationState> {
        self.sessions.get(session_id).map(|s| &s.state)
    }

    pub fn devices(&self) -> Vec<DeviceView> {
        self.registry()
            .iter()
            .filter_map(|d| {
                let s = self.engine.fabric().state(&d.id)?;
                Some(DeviceView {
                    id: d.id.clone(),
                    name: d.name.clone(),
                    kind: d.kind,
                    supported_actions: d.supported_actions.clone(),
                    state: s.value,
                    updated_at: s.updated_at,
                })
            })
            .collect()
    }

    pub fn rules(&self) -> Vec<RuleView> {
        self.engine
            .active_rules()
            .into_iter()
            .map(|c| RuleView {
                id: c.id(),
                kind: c.kind(),
                device: c.spec.action.device_id.clone(),
                description: describe_sentence(&c.spec, self.registry()),
                created_by: c.spec.created_by.clone(),
                state: c.lifecycle.state,
            })
            .collect()
    }

    pub fn log_since(&self, seq: u64) -> &[LogEntry] {
        self.engine.log().since(seq)
    }

    /// Moves the virtual clock forward, firing whatever falls due.
    pub fn advance(&mut self, by: chrono::Duration) -> Result<Timestamp, EngineError> {
        self.engine.advance(by)?;
        Ok(self.now())
    }

    /// Forces a device's state from outside, as a scripted sensor would.
    pub fn set_device_state(&mut self, id: &DeviceId, value: StateValue) -> Result<(), EngineError> {
        self.engine.run_due();
        self.engine.inject(id, value)
    }

    /// Fires due wakeups under the wall clock.
    pub fn tick(&mut self) {
        self.engine.run_due();
    }

    pub fn clock_event(&self) -> StreamEvent {
        StreamEvent::Clock {
            now: self.now(),
            is_virtual: self.engine.clock().is_virtual(),
        }
    }

    /// Stream records produced since the last call: log appends, then state
    /// changes, then replies.
    pub fn drain_events(&mut self) -> Vec<StreamEvent> {
        let mut out: Vec<StreamEvent> = self
            .engine
            .log()
            .since(self.streamed)
            .iter()
            .map(|e| StreamEvent::LogAppend { entry: Box::new(e.clone()) })
            .collect();
        self.streamed = self.engine.log().entries().last().map_or(0, |e| e.seq);
        out.append(&mut self.changes.lock().unwrap());
        out.append(&mut self.replies);
        out
    }
}

fn make_clock(config: &Config, resumed: Option<Timestamp>) -> SystemClock {
    match config.clock {
        ClockMode::Wall => SystemClock::Wall(WallClock::default()),
        ClockMode::Virtual => {
            let start = match (config.start, resumed) {
                (Some(s), Some(r)) => s.max(r),
                (s, r) => s.or(r).unwrap_or_else(|| {
                    let now = WallClock::default().now();
                    now.date().and_hms_opt(0, 0, 0).expect("midnight exists")
                }),
            };
            SystemClock::Virtual(VirtualClock::new(start))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_timestamp, DeviceDescriptor};
    use tempfile::TempDir;

    fn config(dir: &TempDir) -> Config {
        let devices = dir.path().join("fixture.jsonl");
        let registry = Registry::from_devices(vec![
            DeviceDescriptor::toggleable("kitchen", "kitchen light"),
            DeviceDescriptor::sensor("motion", "motion sensor"),
        ])
        .unwrap();
        crate::persistence::save_registry(&devices, &registry).unwrap();
        Config {
            data_dir: Some(dir.path().join("data")),
            devices: Some(devices),
            clock: ClockMode::Virtual,
            start: Some(parse_timestamp("2024-03-04 07:00").unwrap()),
        }
    }

    #[test]
    fn chat_streams_log_state_and_reply() {
        let dir = TempDir::new().unwrap();
        let mut a = Assistant::open(&config(&dir)).unwrap();
        let env = a.chat("s1", "turn on the kitchen light");
        assert_eq!(env.turn_seq, 1);
        assert_eq!(env.reply.text, "Okay, turning on the kitchen light.");
        let events = a.drain_events();
        let kinds: Vec<&str> = events
            .iter()
            .map(|e| match e {
                StreamEvent::LogAppend { .. } => "log",
                StreamEvent::StateChange { .. } => "state",
                StreamEvent::Reply { .. } => "reply",
                StreamEvent::Clock { .. } => "clock",
            })
            .collect();
        assert_eq!(kinds, vec!["log", "state", "reply"]);
        assert!(a.drain_events().is_empty());
        assert_eq!(a.chat("s1", "what can you do").turn_seq, 2);
        assert_eq!(a.chat("s2", "what can you do").turn_seq, 1);
    }

    #[test]
    fn restart_keeps_rules_and_clock() {
        let dir = TempDir::new().unwrap();
        let cfg = config(&dir);
        {
            let mut a = Assistant::open(&cfg).unwrap();
            a.chat("s", "turn on the kitchen light when the motion sensor is activated");
            a.advance(chrono::Duration::hours(2)).unwrap();
        }
        let resumed = Config {
            devices: None,
            start: None,
            ..cfg
        };
        let mut a = Assistant::open(&resumed).unwrap();
        assert_eq!(a.now(), parse_timestamp("2024-03-04 09:00").unwrap());
        assert_eq!(a.rules().len(), 1);
        a.set_device_state(&DeviceId::new("motion"), StateValue::OnOff(true))
            .unwrap();
        assert_eq!(a.devices()[0].state, StateValue::OnOff(true));
    }

    #[test]
    fn empty_registry_is_rejected() {
        assert!(matches!(
            Assistant::open(&Config::default()),
            Err(SystemError::NoDevices)
        ));
    }

    #[test]
    fn stream_event_wire_shape() {
        let e = StreamEvent::Clock {
            now: parse_timestamp("2024-03-04 07:00").unwrap(),
            is_virtual: true,
        };
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"type":"clock","now":"2024-03-04T07:00:00","virtual":true}"#
        );
    }
}
