//! The command engine: immediate actions, one-shot and period schedules,
//! daily repeating rules and event rules, all undoable.
//!
//! All mutation happens through `&mut Engine`, which makes the engine its own
//! serial executor: timer wakeups, bus messages (buffered in an inbox by the
//! per-device listeners) and user requests are processed one at a time.

pub mod describe;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{Bus, BusError, DeviceFabric, Payload, QueueId, QueueMessage, SubscriptionId, Timeline};
use crate::causality::{Actor, CommandLog, Effect, LogEntry, StorageError, Trigger};
use crate::model::{
    next_occurrence, Action, ActionKind, Clock, CommandId, CommandKind, CommandSpec, Condition,
    DeviceId, ModelError, Registry, StateValue, SystemClock, TimeSpec, TimerHandle, Timers,
    Timestamp,
};

/// Upper bound on state-change messages handled by one [`Engine::pump`], which
/// stops event rules that toggle each other from looping forever.
const MAX_CASCADE: usize = 10_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("the {device} does not support {action}")]
    Unsupported { device: String, action: ActionKind },
    #[error(transparent)]
    Invalid(#[from] ModelError),
    #[error("unknown command {0}")]
    UnknownCommand(CommandId),
    #[error("command {0} was already cancelled")]
    AlreadyCancelled(CommandId),
    #[error("command {0} cannot be executed from its current state")]
    NotExecutable(CommandId),
    #[error("command {0} does not run at a single time of day")]
    NotReschedulable(CommandId),
    #[error("there is nothing to cancel")]
    NothingToCancel,
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("the clock is not virtual")]
    NotVirtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleState {
    Created,
    FirstPending,
    FirstDone,
    Completed,
    Rescheduling,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandLifecycle {
    pub state: LifecycleState,
    pub pending_handle: Option<TimerHandle>,
}

impl CommandLifecycle {
    fn new() -> Self {
        Self {
            state: LifecycleState::Created,
            pending_handle: None,
        }
    }
}

/// A command together with its runtime state.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub spec: CommandSpec,
    pub lifecycle: CommandLifecycle,
    /// Target device value before the command first executed.
    pub snapshot: StateValue,
    /// How many times the command has acted on its device.
    pub fired: u32,
}

impl Command {
    pub fn id(&self) -> CommandId {
        self.spec.id
    }

    pub fn kind(&self) -> CommandKind {
        self.spec.kind
    }

    pub fn is_active(&self) -> bool {
        !matches!(
            self.lifecycle.state,
            LifecycleState::Completed | LifecycleState::Cancelled
        )
    }

    pub fn is_cancelled(&self) -> bool {
        self.lifecycle.state == LifecycleState::Cancelled
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRegistration {
    pub command_id: CommandId,
    pub condition: Condition,
    pub queue: QueueId,
}

/// Which boundary of a command a wakeup belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
enum TimerJob {
    Fire { command: CommandId, phase: Phase },
    Scenario { device: DeviceId },
}

/// What a user asked the engine to do.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandDraft {
    pub action: Action,
    pub time: Option<TimeSpec>,
    pub trigger: Option<Condition>,
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionReceipt {
    pub command: CommandId,
    pub kind: CommandKind,
    /// Log entry written by execution (the action or the rule creation).
    pub entry: u64,
    pub next_fire: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UndoReceipt {
    pub command: CommandId,
    /// Log entry of the restoring action, if one was needed.
    pub restored: Option<u64>,
    pub cancelled_handle: bool,
    pub observer_removed: bool,
}

/// Observable engine state used to check undo soundness.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineSnapshot {
    pub states: Vec<(DeviceId, StateValue)>,
    pub pending: Vec<TimerHandle>,
    pub observers: Vec<CommandId>,
}

/// Reconstructed engine state from a persisted log.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineBootstrap {
    pub commands: Vec<Command>,
    /// Wakeups to schedule: command, boundary, time.
    pub pending: Vec<(CommandId, Phase, Timestamp)>,
    /// Last known value of each device that the log changed.
    pub states: Vec<(DeviceId, StateValue)>,
    pub next_command_id: u64,
}

pub struct Engine {
    clock: SystemClock,
    registry: Registry,
    bus: Bus,
    fabric: DeviceFabric,
    commands: BTreeMap<CommandId, Command>,
    observers: Vec<ObserverRegistration>,
    timers: Timers<TimerJob>,
    log: CommandLog,
    inbox: Arc<Mutex<VecDeque<QueueMessage>>>,
    listeners: Vec<SubscriptionId>,
    // (device, action-queue seq) -> log seq of the entry that published it
    action_links: HashMap<(DeviceId, u64), u64>,
    next_id: u64,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("now", &self.clock.now())
            .field("commands", &self.commands.len())
            .field("observers", &self.observers.len())
            .field("timers", &self.timers.len())
            .field("log", &self.log)
            .finish()
    }
}

impl Engine {
    /// Builds the bus and simulated devices and attaches one listener per
    /// device event queue.
    pub fn new(registry: Registry, clock: SystemClock, log: CommandLog) -> Self {
        let shared: Arc<dyn Clock> = Arc::new(clock.clone());
        let bus = Bus::new(shared.clone());
        let fabric = DeviceFabric::new(bus.clone(), shared, &registry);
        let inbox: Arc<Mutex<VecDeque<QueueMessage>>> = Arc::default();
        let listeners = registry
            .iter()
            .map(|d| {
                let inbox = inbox.clone();
                bus.subscribe(&QueueId::events(&d.id), move |m| {
                    inbox.lock().unwrap().push_back(m.clone())
                })
                .expect("fabric registered every device queue")
            })
            .collect();
        Self {
            clock,
            registry,
            bus,
            fabric,
            commands: BTreeMap::new(),
            observers: Vec::new(),
            timers: Timers::new(),
            log,
            inbox,
            listeners,
            action_links: HashMap::new(),
            next_id: 1,
        }
    }

    /// Restores rules and schedules reconstructed from a log.
    pub fn bootstrap(&mut self, boot: EngineBootstrap) {
        self.next_id = self.next_id.max(boot.next_command_id);
        for (device, value) in boot.states {
            if self.fabric.restore_state(&device, value).is_err() {
                log::warn!("restore: no device {device}");
            }
        }
        for mut cmd in boot.commands {
            if cmd.kind() == CommandKind::EventRule && cmd.is_active() {
                self.register_observer(&cmd.spec);
            }
            cmd.lifecycle.pending_handle = None;
            self.commands.insert(cmd.id(), cmd);
        }
        for (id, phase, at) in boot.pending {
            self.schedule(id, phase, at);
        }
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn clock(&self) -> &SystemClock {
        &self.clock
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn fabric(&self) -> &DeviceFabric {
        &self.fabric
    }

    pub fn log(&self) -> &CommandLog {
        &self.log
    }

    pub fn listener_count(&self) -> usize {
        self.listeners.len()
    }

    pub fn observers(&self) -> &[ObserverRegistration] {
        &self.observers
    }

    pub fn pending_timers(&self) -> usize {
        self.timers.len()
    }

    pub fn next_wakeup(&self) -> Option<Timestamp> {
        self.timers.next_at()
    }

    pub fn command(&self, id: CommandId) -> Option<&Command> {
        self.commands.get(&id)
    }

    /// All commands in creation order.
    pub fn commands(&self) -> impl Iterator<Item = &Command> {
        self.commands.values()
    }

    pub fn state_of(&self, device: &DeviceId) -> Option<StateValue> {
        self.fabric.state(device).map(|s| s.value)
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            states: self
                .fabric
                .states()
                .into_iter()
                .map(|s| (s.device_id, s.value))
                .collect(),
            pending: self.timers.handles().collect(),
            observers: self.observers.iter().map(|o| o.command_id).collect(),
        }
    }

    /// Active scheduled or event rules acting on `device`, in creation order.
    pub fn active_rules_for(&self, device: &DeviceId) -> Vec<&Command> {
        self.commands
            .values()
            .filter(|c| c.kind() != CommandKind::Direct && c.is_active())
            .filter(|c| &c.spec.action.device_id == device)
            .collect()
    }

    pub fn active_rules(&self) -> Vec<&Command> {
        self.commands
            .values()
            .filter(|c| c.kind() != CommandKind::Direct && c.is_active())
            .collect()
    }

    /// Most recent user command that has not been cancelled.
    pub fn last_cancellable(&self) -> Option<&Command> {
        self.commands.values().rev().find(|c| !c.is_cancelled())
    }

    fn validate(&self, spec: &CommandSpec) -> Result<(), EngineError> {
        for action in spec.actions() {
            let device = self
                .registry
                .get(&action.device_id)
                .ok_or_else(|| EngineError::UnknownDevice(action.device_id.clone()))?;
            action.validate_shape()?;
            if !device.supports(action.kind) {
                return Err(EngineError::Unsupported {
                    device: device.name.clone(),
                    action: action.kind,
                });
            }
        }
        if let Some(cond) = &spec.trigger {
            let state = self
                .state_of(&cond.device_id)
                .ok_or_else(|| EngineError::UnknownDevice(cond.device_id.clone()))?;
            cond.holds(&state)?;
        }
        Ok(())
    }

    /// Creates a command from a draft and executes it now.
    pub fn submit(&mut self, draft: CommandDraft) -> Result<ExecutionReceipt, EngineError> {
        let spec = CommandSpec::new(
            CommandId(self.next_id),
            draft.action,
            draft.time,
            draft.trigger,
            draft.utterance,
            self.now(),
        )?;
        let snapshot = self
            .state_of(&spec.action.device_id)
            .ok_or_else(|| EngineError::UnknownDevice(spec.action.device_id.clone()))?;
        let cmd = Command {
            spec,
            lifecycle: CommandLifecycle::new(),
            snapshot,
            fired: 0,
        };
        self.execute(cmd)
    }

    /// Executes a freshly created command.
    pub fn execute(&mut self, mut cmd: Command) -> Result<ExecutionReceipt, EngineError> {
        if cmd.lifecycle.state != LifecycleState::Created || self.commands.contains_key(&cmd.id())
        {
            return Err(EngineError::NotExecutable(cmd.id()));
        }
        self.validate(&cmd.spec)?;
        let id = cmd.id();
        let now = self.now();
        let user = Actor::User {
            utterance: cmd.spec.created_by.clone(),
            command: id,
        };

        let entry = if cmd.kind() == CommandKind::Direct {
            self.perform(cmd.spec.action.clone(), user)?
        } else {
            self.log
                .append(
                    now,
                    user,
                    Effect::RuleCreated {
                        command: cmd.spec.clone(),
                        snapshot: cmd.snapshot.clone(),
                    },
                )?
                .seq
        };
        self.next_id = self.next_id.max(id.0 + 1);

        let next = match (&cmd.spec.kind, &cmd.spec.time) {
            (CommandKind::Direct, _) => {
                cmd.fired += 1;
                cmd.lifecycle.state = LifecycleState::Completed;
                None
            }
            (CommandKind::Delayed, Some(TimeSpec::Instant(at))) => {
                cmd.lifecycle.state = LifecycleState::FirstPending;
                Some((Phase::First, (*at).max(now)))
            }
            (CommandKind::Delayed, Some(TimeSpec::Delay(secs))) => {
                cmd.lifecycle.state = LifecycleState::FirstPending;
                Some((Phase::First, now + chrono::Duration::seconds(*secs as i64)))
            }
            (CommandKind::Period, Some(TimeSpec::Period { start, .. })) => {
                cmd.lifecycle.state = LifecycleState::FirstPending;
                Some((Phase::First, (*start).max(now)))
            }
            (CommandKind::Repeating, Some(TimeSpec::DailyAt(t))) => {
                cmd.lifecycle.state = LifecycleState::Rescheduling;
                Some((Phase::First, next_occurrence(now, *t)))
            }
            (CommandKind::RepeatingPeriod, Some(TimeSpec::DailyPeriod { start, .. })) => {
                cmd.lifecycle.state = LifecycleState::Rescheduling;
                Some((Phase::First, next_occurrence(now, *start)))
            }
            (CommandKind::EventRule, _) => {
                self.register_observer(&cmd.spec);
                cmd.lifecycle.state = LifecycleState::Rescheduling;
                None
            }
            _ => unreachable!("CommandSpec::new derives kind from time"),
        };
        let kind = cmd.kind();
        self.commands.insert(id, cmd);
        let next_fire = next.map(|(phase, at)| {
            self.schedule(id, phase, at);
            at
        });
        self.pump();
        Ok(ExecutionReceipt {
            command: id,
            kind,
            entry,
            next_fire,
        })
    }

    fn register_observer(&mut self, spec: &CommandSpec) {
        if let Some(cond) = &spec.trigger {
            self.observers.push(ObserverRegistration {
                command_id: spec.id,
                condition: cond.clone(),
                queue: QueueId::events(&cond.device_id),
            });
        }
    }

    fn schedule(&mut self, id: CommandId, phase: Phase, at: Timestamp) {
        let handle = self.timers.schedule(at, id.0, TimerJob::Fire { command: id, phase });
        if let Some(cmd) = self.commands.get_mut(&id) {
            cmd.lifecycle.pending_handle = Some(handle);
        }
    }

    /// Logs then publishes an action (write-ahead).
    fn perform(&mut self, action: Action, actor: Actor) -> Result<u64, EngineError> {
        let device = action.device_id.clone();
        let old = self
            .state_of(&device)
            .ok_or_else(|| EngineError::UnknownDevice(device.clone()))?;
        let new = action.apply(&old);
        let entry = self
            .log
            .append(
                self.now(),
                actor,
                Effect::ActionPerformed {
                    action: action.clone(),
                    old,
                    new,
                },
            )?
            .seq;
        let seq = self
            .bus
            .publish(&QueueId::actions(&device), Payload::Action(action))?;
        self.action_links.insert((device, seq), entry);
        Ok(entry)
    }

    /// Undoes a command: cancels its wakeups and observers and, if it has
    /// acted, restores its device to the value it had before execution.
    pub fn undo(&mut self, id: CommandId, utterance: &str) -> Result<UndoReceipt, EngineError> {
        let cmd = self
            .commands
            .get(&id)
            .ok_or(EngineError::UnknownCommand(id))?;
        if cmd.is_cancelled() {
            return Err(EngineError::AlreadyCancelled(id));
        }
        let acted = cmd.kind() == CommandKind::Direct || cmd.fired > 0;
        let device = cmd.spec.action.device_id.clone();
        let snapshot = cmd.snapshot.clone();
        let handle = cmd.lifecycle.pending_handle;
        let actor = Actor::User {
            utterance: utterance.to_string(),
            command: id,
        };

        self.log
            .append(self.now(), actor.clone(), Effect::RuleRemoved { command: id })?;
        let cancelled_handle = handle.is_some_and(|h| self.timers.cancel(h).is_some());
        let before = self.observers.len();
        self.observers.retain(|o| o.command_id != id);
        let observer_removed = self.observers.len() != before;
        if let Some(cmd) = self.commands.get_mut(&id) {
            cmd.lifecycle.state = LifecycleState::Cancelled;
            cmd.lifecycle.pending_handle = None;
        }

        let restored = if acted && self.state_of(&device).as_ref() != Some(&snapshot) {
            Some(self.perform(snapshot.restoring_action(&device), actor)?)
        } else {
            None
        };
        self.pump();
        Ok(UndoReceipt {
            command: id,
            restored,
            cancelled_handle,
            observer_removed,
        })
    }

    /// Undoes the most recent user command, returning a reply naming it.
    pub fn cancel_last(&mut self, utterance: &str) -> Result<(String, UndoReceipt), EngineError> {
        let cmd = self.last_cancellable().ok_or(EngineError::NothingToCancel)?;
        let id = cmd.id();
        let text = format!(
            "Okay, I cancelled \"{}\".",
            describe::describe(&cmd.spec, &self.registry)
        );
        let receipt = self.undo(id, utterance)?;
        Ok((text, receipt))
    }

    /// Moves a single-time rule to a new time of day. The old command is
    /// retired without touching device state; a new command replaces it.
    pub fn reschedule(
        &mut self,
        id: CommandId,
        time: NaiveTime,
        utterance: &str,
    ) -> Result<CommandId, EngineError> {
        let cmd = self
            .commands
            .get(&id)
            .ok_or(EngineError::UnknownCommand(id))?;
        if cmd.is_cancelled() {
            return Err(EngineError::AlreadyCancelled(id));
        }
        let now = self.now();
        let new_time = match (&cmd.spec.kind, cmd.lifecycle.state) {
            (CommandKind::Repeating, _) => TimeSpec::DailyAt(time),
            (CommandKind::Delayed, LifecycleState::FirstPending) => {
                TimeSpec::Instant(next_occurrence(now, time))
            }
            _ => return Err(EngineError::NotReschedulable(id)),
        };
        let new_id = CommandId(self.next_id);
        let spec = CommandSpec::new(
            new_id,
            cmd.spec.action.clone(),
            Some(new_time),
            None,
            utterance,
            now,
        )?;
        let replacement = Command {
            spec,
            lifecycle: CommandLifecycle::new(),
            snapshot: cmd.snapshot.clone(),
            fired: cmd.fired,
        };
        let handle = cmd.lifecycle.pending_handle;

        self.log.append(
            now,
            Actor::User {
                utterance: utterance.to_string(),
                command: id,
            },
            Effect::RuleRemoved { command: id },
        )?;
        if let Some(h) = handle {
            self.timers.cancel(h);
        }
        if let Some(cmd) = self.commands.get_mut(&id) {
            cmd.lifecycle.state = LifecycleState::Cancelled;
            cmd.lifecycle.pending_handle = None;
        }
        self.execute(replacement)?;
        Ok(new_id)
    }

    /// Dispatches one state-change message to the observer table. Returns the
    /// commands that fired, in registration order.
    pub fn on_event(&mut self, msg: &QueueMessage) -> Vec<CommandId> {
        let Payload::StateChange {
            old,
            new,
            action_seq,
        } = &msg.payload
        else {
            return Vec::new();
        };
        let device = old.device_id.clone();
        let matching: Vec<(CommandId, Action)> = self
            .observers
            .iter()
            .filter(|o| o.condition.device_id == device)
            .filter(|o| o.condition.eval(&old.value, &new.value).unwrap_or(false))
            .filter_map(|o| {
                self.commands
                    .get(&o.command_id)
                    .map(|c| (o.command_id, c.spec.action.clone()))
            })
            .collect();
        let caused_by = action_seq.and_then(|s| self.action_links.get(&(device.clone(), s)).copied());
        let mut fired = Vec::new();
        for (id, action) in matching {
            let actor = Actor::Event {
                command: id,
                trigger: Trigger {
                    device: device.clone(),
                    seq: msg.seq,
                    old: old.value.clone(),
                    new: new.value.clone(),
                    caused_by,
                },
            };
            match self.perform(action, actor) {
                Ok(_) => {
                    if let Some(c) = self.commands.get_mut(&id) {
                        c.fired += 1;
                    }
                    fired.push(id);
                }
                Err(e) => log::warn!("event rule {id} failed to fire: {e}"),
            }
        }
        fired
    }

    /// Processes buffered bus messages until the fabric is quiet.
    pub fn pump(&mut self) -> usize {
        let mut handled = 0;
        loop {
            let next = self.inbox.lock().unwrap().pop_front();
            let Some(msg) = next else { break };
            handled += 1;
            if handled > MAX_CASCADE {
                log::warn!("event cascade exceeded {MAX_CASCADE} messages; dropping the rest");
                self.inbox.lock().unwrap().clear();
                break;
            }
            self.on_event(&msg);
        }
        handled
    }

    fn fire(&mut self, id: CommandId, phase: Phase, at: Timestamp) {
        let Some(cmd) = self.commands.get_mut(&id) else {
            return;
        };
        cmd.lifecycle.pending_handle = None;
        if cmd.is_cancelled() {
            return;
        }
        let spec = cmd.spec.clone();
        let action = match phase {
            Phase::First => spec.action.clone(),
            Phase::Second => spec.paired.clone().unwrap_or_else(|| spec.action.clone()),
        };
        let next = match (&spec.kind, &spec.time, phase) {
            (CommandKind::Period, Some(TimeSpec::Period { end, .. }), Phase::First) => {
                Some((Phase::Second, (*end).max(at), LifecycleState::FirstDone))
            }
            (CommandKind::Repeating, Some(TimeSpec::DailyAt(t)), _) => Some((
                Phase::First,
                next_occurrence(at, *t),
                LifecycleState::Rescheduling,
            )),
            (CommandKind::RepeatingPeriod, Some(TimeSpec::DailyPeriod { end, .. }), Phase::First) => {
                Some((Phase::Second, next_occurrence(at, *end), LifecycleState::Rescheduling))
            }
            (
                CommandKind::RepeatingPeriod,
                Some(TimeSpec::DailyPeriod { start, .. }),
                Phase::Second,
            ) => Some((Phase::First, next_occurrence(at, *start), LifecycleState::Rescheduling)),
            _ => None,
        };
        match self.perform(action, Actor::Rule { command: id }) {
            Ok(_) => {
                if let Some(c) = self.commands.get_mut(&id) {
                    c.fired += 1;
                }
            }
            Err(e) => log::warn!("command {id} failed to fire: {e}"),
        }
        match next {
            Some((next_phase, next_at, state)) => {
                if let Some(c) = self.commands.get_mut(&id) {
                    c.lifecycle.state = state;
                }
                self.schedule(id, next_phase, next_at);
            }
            None => {
                if let Some(c) = self.commands.get_mut(&id) {
                    c.lifecycle.state = LifecycleState::Completed;
                }
            }
        }
    }

    fn run_job(&mut self, job: TimerJob, at: Timestamp) {
        match job {
            TimerJob::Fire { command, phase } => self.fire(command, phase, at),
            TimerJob::Scenario { device } => {
                if let Err(e) = self.fabric.step_scenario(&device) {
                    log::warn!("scenario step on {device} failed: {e}");
                }
            }
        }
        self.pump();
    }

    fn run_until(&mut self, target: Timestamp) {
        while let Some(at) = self.timers.next_at() {
            if at > target {
                break;
            }
            if let SystemClock::Virtual(c) = &self.clock {
                c.advance_to(at);
            }
            if let Some((_, at, job)) = self.timers.pop_due(at) {
                self.run_job(job, at);
            }
        }
    }

    /// Advances the virtual clock to `target`, firing every wakeup on the way
    /// in time order.
    pub fn advance_to(&mut self, target: Timestamp) -> Result<(), EngineError> {
        let SystemClock::Virtual(clock) = self.clock.clone() else {
            return Err(EngineError::NotVirtual);
        };
        self.run_until(target);
        clock.advance_to(target);
        self.log.mark_clock(self.now())?;
        Ok(())
    }

    pub fn advance(&mut self, by: chrono::Duration) -> Result<(), EngineError> {
        let target = self.now() + by;
        self.advance_to(target)
    }

    /// Fires everything due at the current clock reading (wall-clock mode).
    pub fn run_due(&mut self) {
        let now = self.now();
        self.run_until(now);
    }

    /// Schedules a scripted state timeline on a device.
    pub fn run_scenario(&mut self, timeline: Timeline) -> Result<(), EngineError> {
        if self.registry.get(&timeline.device).is_none() {
            return Err(EngineError::UnknownDevice(timeline.device.clone()));
        }
        let device = timeline.device.clone();
        let times: Vec<Timestamp> = timeline.steps.iter().map(|(t, _)| *t).collect();
        self.fabric.attach_scenario(timeline)?;
        for at in times {
            self.timers.schedule(
                at,
                0,
                TimerJob::Scenario {
                    device: device.clone(),
                },
            );
        }
        Ok(())
    }

    /// Sets a device's state from outside (sensor injection).
    pub fn inject(&mut self, device: &DeviceId, value: StateValue) -> Result<(), EngineError> {
        if self.registry.get(device).is_none() {
            return Err(EngineError::UnknownDevice(device.clone()));
        }
        self.fabric.set_state(device, value)?;
        self.pump();
        Ok(())
    }

    pub fn log_entries(&self) -> &[LogEntry] {
        self.log.entries()
    }
}
