use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::Timestamp;

/// Time source. `now()` never decreases between calls.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

/// Test-controlled clock that only moves when told to.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    now: Arc<Mutex<Timestamp>>,
}

impl VirtualClock {
    pub fn new(start: Timestamp) -> Self {
        Self {
            now: Arc::new(Mutex::new(start)),
        }
    }

    /// Moves the clock forward to `t`; earlier targets are ignored.
    pub fn advance_to(&self, t: Timestamp) {
        let mut now = self.now.lock().unwrap();
        if t > *now {
            *now = t;
        }
    }

    pub fn advance(&self, by: chrono::Duration) {
        let mut now = self.now.lock().unwrap();
        *now += by;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Timestamp {
        *self.now.lock().unwrap()
    }
}

/// Local wall-clock time, clamped so it never runs backwards.
#[derive(Debug, Clone, Default)]
pub struct WallClock {
    last: Arc<Mutex<Option<Timestamp>>>,
}

impl Clock for WallClock {
    fn now(&self) -> Timestamp {
        let t = chrono::Local::now().naive_local();
        let mut last = self.last.lock().unwrap();
        let t = match *last {
            Some(prev) if prev > t => prev,
            _ => t,
        };
        *last = Some(t);
        t
    }
}

#[derive(Debug, Clone)]
pub enum SystemClock {
    Virtual(VirtualClock),
    Wall(WallClock),
}

impl SystemClock {
    pub fn is_virtual(&self) -> bool {
        matches!(self, SystemClock::Virtual(_))
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        match self {
            SystemClock::Virtual(c) => c.now(),
            SystemClock::Wall(c) => c.now(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimerHandle(u64);

/// Pending wakeups ordered by `(at, order, handle)`.
///
/// Each scheduled entry is returned by [`Timers::pop_due`] exactly once unless
/// cancelled first.
#[derive(Debug)]
pub struct Timers<T> {
    next: u64,
    queue: BTreeMap<(Timestamp, u64, TimerHandle), T>,
    index: HashMap<TimerHandle, (Timestamp, u64)>,
}

impl<T> Default for Timers<T> {
    fn default() -> Self {
        Self {
            next: 1,
            queue: BTreeMap::new(),
            index: HashMap::new(),
        }
    }
}

impl<T> Timers<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// `order` breaks ties between wakeups at the same instant.
    pub fn schedule(&mut self, at: Timestamp, order: u64, payload: T) -> TimerHandle {
        let handle = TimerHandle(self.next);
        self.next += 1;
        self.queue.insert((at, order, handle), payload);
        self.index.insert(handle, (at, order));
        handle
    }

    /// Returns the payload if the handle was still pending.
    pub fn cancel(&mut self, handle: TimerHandle) -> Option<T> {
        let (at, order) = self.index.remove(&handle)?;
        self.queue.remove(&(at, order, handle))
    }

    pub fn next_at(&self) -> Option<Timestamp> {
        self.queue.keys().next().map(|(at, _, _)| *at)
    }

    /// Removes and returns the earliest wakeup due at or before `now`.
    pub fn pop_due(&mut self, now: Timestamp) -> Option<(TimerHandle, Timestamp, T)> {
        let key = *self.queue.keys().next()?;
        if key.0 > now {
            return None;
        }
        let payload = self.queue.remove(&key)?;
        self.index.remove(&key.2);
        Some((key.2, key.0, payload))
    }

    pub fn is_pending(&self, handle: TimerHandle) -> bool {
        self.index.contains_key(&handle)
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn handles(&self) -> impl Iterator<Item = TimerHandle> + '_ {
        self.queue.keys().map(|(_, _, h)| *h)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Timestamp, &T)> {
        self.queue.iter().map(|((at, _, _), p)| (*at, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_timestamp;
    use proptest::prelude::*;

    fn t(s: &str) -> Timestamp {
        parse_timestamp(s).unwrap()
    }

    #[test]
    fn virtual_clock_is_monotone() {
        let c = VirtualClock::new(t("2024-01-01 10:00"));
        c.advance_to(t("2024-01-01 09:00"));
        assert_eq!(c.now(), t("2024-01-01 10:00"));
        c.advance(chrono::Duration::minutes(5));
        assert_eq!(c.now(), t("2024-01-01 10:05"));
    }

    #[test]
    fn wall_clock_never_decreases() {
        let c = WallClock::default();
        let a = c.now();
        let b = c.now();
        assert!(b >= a);
    }

    #[test]
    fn fires_in_time_then_order() {
        let mut timers = Timers::new();
        timers.schedule(t("2024-01-01 10:00"), 2, "b");
        timers.schedule(t("2024-01-01 10:00"), 1, "a");
        timers.schedule(t("2024-01-01 09:00"), 9, "first");
        assert!(timers.pop_due(t("2024-01-01 08:59")).is_none());
        let got: Vec<_> = std::iter::from_fn(|| timers.pop_due(t("2024-01-01 10:00")))
            .map(|(_, _, p)| p)
            .collect();
        assert_eq!(got, vec!["first", "a", "b"]);
    }

    #[test]
    fn cancelled_never_fires() {
        let mut timers = Timers::new();
        let h = timers.schedule(t("2024-01-01 10:00"), 0, ());
        assert!(timers.cancel(h).is_some());
        assert!(timers.cancel(h).is_none());
        assert!(timers.pop_due(t("2030-01-01 00:00")).is_none());
    }

    proptest! {
        // Every uncancelled wakeup fires exactly once at or after its time; cancelled ones never do.
        #[test]
        fn schedule_cancel_contract(
            offsets in proptest::collection::vec((0i64..500, any::<bool>()), 0..40),
            steps in proptest::collection::vec(1i64..100, 1..20),
        ) {
            let base = t("2024-01-01 00:00");
            let clock = VirtualClock::new(base);
            let mut timers = Timers::new();
            let mut expected = Vec::new();
            for (i, (off, cancel)) in offsets.iter().enumerate() {
                let at = base + chrono::Duration::minutes(*off);
                let h = timers.schedule(at, i as u64, i);
                if *cancel {
                    timers.cancel(h);
                } else {
                    expected.push((i, at));
                }
            }
            let mut fired = Vec::new();
            for step in steps.iter().chain(std::iter::once(&1000)) {
                clock.advance(chrono::Duration::minutes(*step));
                while let Some((_, at, i)) = timers.pop_due(clock.now()) {
                    prop_assert!(clock.now() >= at);
                    fired.push((i, at));
                }
            }
            fired.sort();
            expected.sort();
            prop_assert_eq!(fired, expected);
        }
    }
}
