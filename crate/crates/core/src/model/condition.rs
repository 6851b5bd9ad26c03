use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DeviceId, DeviceState, ModelError, StateValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    BecameOn,
    BecameOff,
    /// Sensor alias of `BecameOn`.
    Activated,
    CrossedThreshold { direction: Direction, threshold: f64 },
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::BecameOn => f.write_str("became_on"),
            Predicate::BecameOff => f.write_str("became_off"),
            Predicate::Activated => f.write_str("activated"),
            Predicate::CrossedThreshold {
                direction: Direction::Up,
                threshold,
            } => write!(f, "crossed_threshold(up, {threshold})"),
            Predicate::CrossedThreshold {
                direction: Direction::Down,
                threshold,
            } => write!(f, "crossed_threshold(down, {threshold})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub device_id: DeviceId,
    pub predicate: Predicate,
}

impl Condition {
    pub fn new(device_id: DeviceId, predicate: Predicate) -> Self {
        Self {
            device_id,
            predicate,
        }
    }

    fn mismatch(&self, value: &StateValue) -> ModelError {
        ModelError::TypeMismatch {
            predicate: self.predicate.to_string(),
            value: match value {
                StateValue::OnOff(_) => "on/off".into(),
                StateValue::Scalar(_) => "scalar".into(),
            },
        }
    }

    /// Whether `value` is on the satisfied side of the predicate.
    pub fn holds(&self, value: &StateValue) -> Result<bool, ModelError> {
        match (&self.predicate, value) {
            (Predicate::BecameOn | Predicate::Activated, StateValue::OnOff(b)) => Ok(*b),
            (Predicate::BecameOff, StateValue::OnOff(b)) => Ok(!*b),
            (
                Predicate::CrossedThreshold {
                    direction,
                    threshold,
                },
                StateValue::Scalar(s),
            ) => Ok(match direction {
                Direction::Up => s.value >= *threshold,
                Direction::Down => s.value <= *threshold,
            }),
            _ => Err(self.mismatch(value)),
        }
    }

    /// True iff the transition `old -> new` makes the predicate become true.
    pub fn eval(&self, old: &StateValue, new: &StateValue) -> Result<bool, ModelError> {
        Ok(!self.holds(old)? && self.holds(new)?)
    }
}

pub fn eval_condition(
    cond: &Condition,
    old: &DeviceState,
    new: &DeviceState,
) -> Result<bool, ModelError> {
    for s in [old, new] {
        if s.device_id != cond.device_id {
            return Err(ModelError::DeviceMismatch {
                expected: cond.device_id.to_string(),
                found: s.device_id.to_string(),
            });
        }
    }
    cond.eval(&old.value, &new.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_timestamp, Scalar};

    fn state(v: StateValue) -> DeviceState {
        DeviceState {
            device_id: "d".into(),
            value: v,
            updated_at: parse_timestamp("2024-01-01 00:00").unwrap(),
        }
    }
    fn on() -> DeviceState {
        state(StateValue::OnOff(true))
    }
    fn off() -> DeviceState {
        state(StateValue::OnOff(false))
    }
    fn temp(v: f64) -> DeviceState {
        state(StateValue::Scalar(Scalar::new(v, "degrees")))
    }
    fn cond(p: Predicate) -> Condition {
        Condition::new("d".into(), p)
    }

    #[test]
    fn became_on() {
        assert!(eval_condition(&cond(Predicate::BecameOn), &off(), &on()).unwrap());
        assert!(!eval_condition(&cond(Predicate::BecameOn), &on(), &on()).unwrap());
        assert!(eval_condition(&cond(Predicate::Activated), &off(), &on()).unwrap());
        assert!(eval_condition(&cond(Predicate::BecameOff), &on(), &off()).unwrap());
    }

    #[test]
    fn threshold_boundaries() {
        let up = cond(Predicate::CrossedThreshold {
            direction: Direction::Up,
            threshold: 20.0,
        });
        assert!(eval_condition(&up, &temp(19.5), &temp(20.0)).unwrap());
        // All four combinations around the threshold, checked against old < t <= new.
        for (a, b) in [(19.5, 20.5), (20.0, 20.5), (20.5, 19.5), (19.0, 19.5)] {
            let expected = a < 20.0 && 20.0 <= b;
            assert_eq!(eval_condition(&up, &temp(a), &temp(b)).unwrap(), expected, "{a}->{b}");
        }
        let down = cond(Predicate::CrossedThreshold {
            direction: Direction::Down,
            threshold: 20.0,
        });
        for (a, b) in [(20.5, 20.0), (20.0, 19.0), (19.0, 20.5), (21.0, 20.5)] {
            let expected = a > 20.0 && 20.0 >= b;
            assert_eq!(eval_condition(&down, &temp(a), &temp(b)).unwrap(), expected, "{a}->{b}");
        }
    }

    #[test]
    fn type_mismatch() {
        assert!(eval_condition(&cond(Predicate::BecameOn), &temp(1.0), &temp(2.0)).is_err());
        let up = cond(Predicate::CrossedThreshold {
            direction: Direction::Up,
            threshold: 1.0,
        });
        assert!(eval_condition(&up, &off(), &on()).is_err());
    }

    #[test]
    fn device_mismatch() {
        let c = Condition::new("other".into(), Predicate::BecameOn);
        assert!(matches!(
            eval_condition(&c, &off(), &on()),
            Err(ModelError::DeviceMismatch { .. })
        ));
    }

    #[test]
    fn no_transition_never_fires() {
        for s in [on(), off()] {
            for p in [Predicate::BecameOn, Predicate::BecameOff, Predicate::Activated] {
                assert!(!eval_condition(&cond(p), &s, &s).unwrap());
            }
        }
        for v in [-3.0, 19.99, 20.0, 42.0] {
            let up = cond(Predicate::CrossedThreshold {
                direction: Direction::Up,
                threshold: 20.0,
            });
            assert!(!eval_condition(&up, &temp(v), &temp(v)).unwrap());
        }
    }
}
