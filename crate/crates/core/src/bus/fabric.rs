use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use super::{Bus, BusError, Payload, QueueId};
use crate::model::{Clock, DeviceDescriptor, DeviceId, DeviceState, Registry, StateValue, Timestamp};

/// A scripted sequence of states for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub device: DeviceId,
    pub steps: VecDeque<(Timestamp, StateValue)>,
}

impl Timeline {
    pub fn new(device: DeviceId, steps: Vec<(Timestamp, StateValue)>) -> Result<Self, BusError> {
        if steps.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(BusError::Scenario(format!(
                "timeline for {device} is not strictly increasing"
            )));
        }
        Ok(Self {
            device,
            steps: steps.into(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDevice {
    pub descriptor: DeviceDescriptor,
    pub current: DeviceState,
    pub scenario: Option<Timeline>,
}

type Devices = Arc<Mutex<BTreeMap<DeviceId, SimulatedDevice>>>;

/// Simulated device controllers: each consumes its action queue and publishes
/// state changes on its event queue.
#[derive(Clone)]
pub struct DeviceFabric {
    bus: Bus,
    clock: Arc<dyn Clock>,
    devices: Devices,
    order: Vec<DeviceId>,
}

impl std::fmt::Debug for DeviceFabric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeviceFabric")
            .field("devices", &self.order)
            .finish()
    }
}

impl DeviceFabric {
    pub fn new(bus: Bus, clock: Arc<dyn Clock>, registry: &Registry) -> Self {
        let mut fabric = Self {
            bus,
            clock,
            devices: Arc::new(Mutex::new(BTreeMap::new())),
            order: Vec::new(),
        };
        for d in registry.iter() {
            fabric.attach(d.clone());
        }
        fabric
    }

    fn attach(&mut self, descriptor: DeviceDescriptor) {
        let id = descriptor.id.clone();
        self.bus.register_device(&id);
        let current = DeviceState {
            device_id: id.clone(),
            value: descriptor.initial_value(),
            updated_at: self.clock.now(),
        };
        self.devices.lock().unwrap().insert(
            id.clone(),
            SimulatedDevice {
                descriptor,
                current,
                scenario: None,
            },
        );
        self.order.push(id.clone());

        let devices = self.devices.clone();
        let bus = self.bus.clone();
        let events = QueueId::events(&id);
        self.bus
            .subscribe(&QueueId::actions(&id), move |msg| {
                let Payload::Action(action) = &msg.payload else {
                    return;
                };
                let change = {
                    let mut devices = devices.lock().unwrap();
                    let Some(dev) = devices.get_mut(&action.device_id) else {
                        return;
                    };
                    let value = action.apply(&dev.current.value);
                    if value == dev.current.value {
                        None
                    } else {
                        let old = dev.current.clone();
                        dev.current = DeviceState {
                            device_id: old.device_id.clone(),
                            value,
                            updated_at: msg.at,
                        };
                        Some((old, dev.current.clone()))
                    }
                };
                if let Some((old, new)) = change {
                    let payload = Payload::StateChange {
                        old,
                        new,
                        action_seq: Some(msg.seq),
                    };
                    if let Err(e) = bus.publish(&events, payload) {
                        log::warn!("device controller could not publish: {e}");
                    }
                }
            })
            .expect("queues were just registered");
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn device_ids(&self) -> &[DeviceId] {
        &self.order
    }

    pub fn state(&self, id: &DeviceId) -> Option<DeviceState> {
        self.devices.lock().unwrap().get(id).map(|d| d.current.clone())
    }

    /// Current states in registry order.
    pub fn states(&self) -> Vec<DeviceState> {
        let devices = self.devices.lock().unwrap();
        self.order
            .iter()
            .filter_map(|id| devices.get(id).map(|d| d.current.clone()))
            .collect()
    }

    /// Overwrites a device's state without publishing anything. Used when
    /// resuming from a persisted log.
    pub fn restore_state(&self, id: &DeviceId, value: StateValue) -> Result<(), BusError> {
        let mut devices = self.devices.lock().unwrap();
        let dev = devices
            .get_mut(id)
            .ok_or_else(|| BusError::UnknownQueue(QueueId::events(id).to_string()))?;
        dev.current = DeviceState {
            device_id: id.clone(),
            value,
            updated_at: self.clock.now(),
        };
        Ok(())
    }

    /// Sets a device's state directly (scripted sensors, injection). Publishes a
    /// state change iff the value differs; returns its seq.
    pub fn set_state(&self, id: &DeviceId, value: StateValue) -> Result<Option<u64>, BusError> {
        let change = {
            let mut devices = self.devices.lock().unwrap();
            let dev = devices
                .get_mut(id)
                .ok_or_else(|| BusError::UnknownQueue(QueueId::events(id).to_string()))?;
            if dev.current.value == value {
                None
            } else {
                let old = dev.current.clone();
                dev.current = DeviceState {
                    device_id: id.clone(),
                    value,
                    updated_at: self.clock.now(),
                };
                Some((old, dev.current.clone()))
            }
        };
        match change {
            Some((old, new)) => {
                let payload = Payload::StateChange {
                    old,
                    new,
                    action_seq: None,
                };
                self.bus.publish(&QueueId::events(id), payload).map(Some)
            }
            None => Ok(None),
        }
    }

    /// Installs a scripted timeline. Rejected while another one is still running
    /// on the same device.
    pub fn attach_scenario(&self, timeline: Timeline) -> Result<(), BusError> {
        let mut devices = self.devices.lock().unwrap();
        let dev = devices.get_mut(&timeline.device).ok_or_else(|| {
            BusError::UnknownQueue(QueueId::events(&timeline.device).to_string())
        })?;
        if dev.scenario.as_ref().is_some_and(|s| !s.is_empty()) {
            return Err(BusError::Scenario(format!(
                "a scenario is already running on {}",
                timeline.device
            )));
        }
        dev.scenario = (!timeline.is_empty()).then_some(timeline);
        Ok(())
    }

    /// Applies the next scripted step of a device's scenario.
    pub fn step_scenario(&self, id: &DeviceId) -> Result<Option<u64>, BusError> {
        let value = {
            let mut devices = self.devices.lock().unwrap();
            let Some(dev) = devices.get_mut(id) else {
                return Ok(None);
            };
            let Some(scenario) = dev.scenario.as_mut() else {
                return Ok(None);
            };
            let step = scenario.steps.pop_front();
            if scenario.is_empty() {
                dev.scenario = None;
            }
            match step {
                Some((_, v)) => v,
                None => return Ok(None),
            }
        };
        self.set_state(id, value)
    }

    pub fn has_scenario(&self, id: &DeviceId) -> bool {
        self.devices
            .lock()
            .unwrap()
            .get(id)
            .is_some_and(|d| d.scenario.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_timestamp, Action, VirtualClock};

    fn setup() -> (DeviceFabric, Arc<Mutex<Vec<Payload>>>) {
        let clock: Arc<dyn Clock> =
            Arc::new(VirtualClock::new(parse_timestamp("2024-01-01 00:00").unwrap()));
        let bus = Bus::new(clock.clone());
        let registry = Registry::from_devices(vec![
            DeviceDescriptor::toggleable("light1", "bedroom light"),
            DeviceDescriptor::sensor("s1", "motion sensor"),
        ])
        .unwrap();
        let fabric = DeviceFabric::new(bus.clone(), clock, &registry);
        let events = Arc::new(Mutex::new(Vec::new()));
        let sink = events.clone();
        bus.subscribe(&QueueId::events(&"light1".into()), move |m| {
            sink.lock().unwrap().push(m.payload.clone())
        })
        .unwrap();
        (fabric, events)
    }

    #[test]
    fn action_changes_state_and_emits_event() {
        let (fabric, events) = setup();
        let seq = fabric
            .bus()
            .publish(
                &QueueId::actions(&"light1".into()),
                Payload::Action(Action::turn_on("light1".into())),
            )
            .unwrap();
        assert_eq!(seq, 1);
        assert_eq!(
            fabric.state(&"light1".into()).unwrap().value,
            StateValue::OnOff(true)
        );
        let events = events.lock().unwrap();
        assert_eq!(events.len(), 1);
        match &events[0] {
            Payload::StateChange {
                old,
                new,
                action_seq,
            } => {
                assert_eq!(old.value, StateValue::OnOff(false));
                assert_eq!(new.value, StateValue::OnOff(true));
                assert_eq!(*action_seq, Some(1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn idempotent_action_emits_nothing() {
        let (fabric, events) = setup();
        fabric
            .bus()
            .publish(
                &QueueId::actions(&"light1".into()),
                Payload::Action(Action::turn_off("light1".into())),
            )
            .unwrap();
        assert!(events.lock().unwrap().is_empty());
    }

    #[test]
    fn timeline_must_increase() {
        let t = parse_timestamp("2024-01-01 10:00").unwrap();
        let r = Timeline::new(
            "s1".into(),
            vec![(t, StateValue::OnOff(true)), (t, StateValue::OnOff(false))],
        );
        assert!(r.is_err());
    }

    #[test]
    fn overlapping_scenarios_rejected() {
        let (fabric, _) = setup();
        let t = parse_timestamp("2024-01-01 10:00").unwrap();
        let tl = Timeline::new("s1".into(), vec![(t, StateValue::OnOff(true))]).unwrap();
        fabric.attach_scenario(tl.clone()).unwrap();
        assert!(fabric.attach_scenario(tl.clone()).is_err());
        fabric.step_scenario(&"s1".into()).unwrap();
        assert!(fabric.attach_scenario(tl).is_ok());
    }

    #[test]
    fn empty_timeline_is_inert() {
        let (fabric, _) = setup();
        let tl = Timeline::new("s1".into(), vec![]).unwrap();
        fabric.attach_scenario(tl).unwrap();
        assert!(!fabric.has_scenario(&"s1".into()));
        assert_eq!(fabric.step_scenario(&"s1".into()).unwrap(), None);
    }
}
