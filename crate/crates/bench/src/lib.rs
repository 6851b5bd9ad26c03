//! Shared fixtures for the benchmarks.

use casa_core::causality::{CommandLog, LogEntry};
use casa_core::dialogue::{run_turn, ConversationState};
use casa_core::engine::Engine;
use casa_core::{parse_timestamp, DeviceDescriptor, Registry, SystemClock, Timestamp, VirtualClock};

pub fn start() -> Timestamp {
    parse_timestamp("2024-03-04 07:00").unwrap()
}

/// `n` lights plus a motion sensor.
pub fn home(n: usize) -> Registry {
    let mut devices: Vec<_> = (0..n)
        .map(|i| DeviceDescriptor::toggleable(format!("light{i}"), format!("light number {i}")))
        .collect();
    devices.push(DeviceDescriptor::toggleable("kitchen", "kitchen light"));
    devices.push(DeviceDescriptor::toggleable("toaster", "toaster"));
    devices.push(DeviceDescriptor::sensor("motion", "motion sensor"));
    Registry::from_devices(devices).unwrap()
}

pub fn engine(registry: Registry) -> Engine {
    Engine::new(registry, SystemClock::Virtual(VirtualClock::new(start())), CommandLog::new())
}

/// A log covering `days` of a daily toaster rule plus a daily kitchen period.
pub fn busy_log(days: i64) -> (Vec<LogEntry>, Timestamp) {
    let mut e = engine(home(4));
    let mut state = ConversationState::new("bench");
    for u in [
        "turn on the toaster every day at 8am",
        "turn on the kitchen light every day from 6pm to 11pm",
        "turn on the light number 1 when the motion sensor is activated",
    ] {
        run_turn(&mut e, &mut state, u);
    }
    e.advance(chrono::Duration::days(days)).unwrap();
    (e.log().entries().to_vec(), e.now())
}
