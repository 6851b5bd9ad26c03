use std::fmt;

use serde::{Deserialize, Serialize};

use super::{normalize_name, ModelError, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(String);

impl DeviceId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DeviceId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Toggleable,
    Sensor,
    Thermostat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    TurnOn,
    TurnOff,
    SetValue,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionKind::TurnOn => "turn_on",
            ActionKind::TurnOff => "turn_off",
            ActionKind::SetValue => "set_value",
        })
    }
}

/// A number with its unit, e.g. `21 degrees`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub value: f64,
    #[serde(default)]
    pub unit: String,
}

impl Scalar {
    pub fn new(value: f64, unit: impl Into<String>) -> Self {
        Self {
            value,
            unit: unit.into(),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value.fract() == 0.0 && self.value.abs() < 1e15 {
            write!(f, "{}", self.value as i64)?;
        } else {
            write!(f, "{}", self.value)?;
        }
        if !self.unit.is_empty() {
            write!(f, " {}", self.unit)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateValue {
    #[serde(rename = "onoff")]
    OnOff(bool),
    Scalar(Scalar),
}

impl StateValue {
    pub fn is_on(&self) -> Option<bool> {
        match self {
            StateValue::OnOff(b) => Some(*b),
            StateValue::Scalar(_) => None,
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            StateValue::Scalar(s) => Some(s.value),
            StateValue::OnOff(_) => None,
        }
    }

    /// The action that brings a device back to this value.
    pub fn restoring_action(&self, device_id: &DeviceId) -> Action {
        match self {
            StateValue::OnOff(true) => Action::turn_on(device_id.clone()),
            StateValue::OnOff(false) => Action::turn_off(device_id.clone()),
            StateValue::Scalar(s) => Action::set_value(device_id.clone(), s.clone()),
        }
    }
}

impl fmt::Display for StateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateValue::OnOff(true) => f.write_str("on"),
            StateValue::OnOff(false) => f.write_str("off"),
            StateValue::Scalar(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub device_id: DeviceId,
    pub value: StateValue,
    pub updated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawDescriptor")]
pub struct DeviceDescriptor {
    pub id: DeviceId,
    pub name: String,
    pub kind: DeviceKind,
    pub supported_actions: Vec<ActionKind>,
    pub emits_events: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<StateValue>,
}

// Omitted fields take the defaults of the device kind.
#[derive(Deserialize)]
struct RawDescriptor {
    id: DeviceId,
    name: String,
    kind: DeviceKind,
    supported_actions: Option<Vec<ActionKind>>,
    emits_events: Option<bool>,
    initial: Option<StateValue>,
}

impl From<RawDescriptor> for DeviceDescriptor {
    fn from(raw: RawDescriptor) -> Self {
        let supported_actions = raw.supported_actions.unwrap_or_else(|| match raw.kind {
            DeviceKind::Toggleable => vec![ActionKind::TurnOn, ActionKind::TurnOff],
            DeviceKind::Sensor => Vec::new(),
            DeviceKind::Thermostat => vec![ActionKind::SetValue],
        });
        Self {
            id: raw.id,
            name: raw.name,
            kind: raw.kind,
            supported_actions,
            emits_events: raw.emits_events.unwrap_or(true),
            initial: raw.initial,
        }
    }
}

impl DeviceDescriptor {
    /// On/off device supporting `turn_on` and `turn_off`.
    pub fn toggleable(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: DeviceId::new(id),
            name: name.into(),
            kind: DeviceKind::Toggleable,
            supported_actions: vec![ActionKind::TurnOn, ActionKind::TurnOff],
            emits_events: true,
            initial: None,
        }
    }

    pub fn sensor(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: DeviceId::new(id),
            name: name.into(),
            kind: DeviceKind::Sensor,
            supported_actions: Vec::new(),
            emits_events: true,
            initial: None,
        }
    }

    pub fn thermostat(id: impl Into<String>, name: impl Into<String>, unit: &str) -> Self {
        Self {
            id: DeviceId::new(id),
            name: name.into(),
            kind: DeviceKind::Thermostat,
            supported_actions: vec![ActionKind::SetValue],
            emits_events: true,
            initial: Some(StateValue::Scalar(Scalar::new(20.0, unit))),
        }
    }

    pub fn with_initial(mut self, value: StateValue) -> Self {
        self.initial = Some(value);
        self
    }

    pub fn supports(&self, kind: ActionKind) -> bool {
        self.supported_actions.contains(&kind)
    }

    pub fn normalized_name(&self) -> String {
        normalize_name(&self.name).unwrap_or_default()
    }

    /// State the simulated device starts in.
    pub fn initial_value(&self) -> StateValue {
        if let Some(v) = &self.initial {
            return v.clone();
        }
        match self.kind {
            DeviceKind::Toggleable | DeviceKind::Sensor => StateValue::OnOff(false),
            DeviceKind::Thermostat => StateValue::Scalar(Scalar::new(20.0, "degrees")),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |reason: &str| ModelError::InvalidDescriptor {
            id: self.id.to_string(),
            reason: reason.to_string(),
        };
        if self.id.as_str().is_empty() {
            return Err(invalid("empty id"));
        }
        if self.id.as_str().contains('/') || self.id.as_str().chars().any(char::is_whitespace) {
            return Err(invalid("id must not contain '/' or whitespace"));
        }
        normalize_name(&self.name).map_err(|_| invalid("empty name"))?;
        match self.kind {
            DeviceKind::Toggleable => {
                if !self.supports(ActionKind::TurnOn) || !self.supports(ActionKind::TurnOff) {
                    return Err(invalid("toggleable devices must support turn_on and turn_off"));
                }
            }
            DeviceKind::Sensor => {
                if !self.supported_actions.is_empty() {
                    return Err(invalid("sensors support no actions"));
                }
                if !self.emits_events {
                    return Err(invalid("sensors must emit events"));
                }
            }
            DeviceKind::Thermostat => {}
        }
        match (self.kind, self.initial_value()) {
            (DeviceKind::Toggleable, StateValue::Scalar(_)) => {
                Err(invalid("toggleable devices hold on/off state"))
            }
            _ => Ok(()),
        }
    }
}

/// The set of known devices, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    devices: Vec<DeviceDescriptor>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_devices(devices: Vec<DeviceDescriptor>) -> Result<Self, ModelError> {
        let mut registry = Self::new();
        for d in devices {
            registry.insert(d)?;
        }
        Ok(registry)
    }

    pub fn insert(&mut self, device: DeviceDescriptor) -> Result<(), ModelError> {
        device.validate()?;
        if self.get(&device.id).is_some() {
            return Err(ModelError::InvalidDescriptor {
                id: device.id.to_string(),
                reason: "duplicate id".into(),
            });
        }
        self.devices.push(device);
        Ok(())
    }

    pub fn get(&self, id: &DeviceId) -> Option<&DeviceDescriptor> {
        self.devices.iter().find(|d| &d.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DeviceDescriptor> {
        self.devices.iter()
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    /// Display name for a device id, falling back to the raw id.
    pub fn name_of(&self, id: &DeviceId) -> String {
        self.get(id)
            .map(|d| d.name.clone())
            .unwrap_or_else(|| id.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub device_id: DeviceId,
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argument: Option<Scalar>,
}

impl Action {
    pub fn turn_on(device_id: DeviceId) -> Self {
        Self {
            device_id,
            kind: ActionKind::TurnOn,
            argument: None,
        }
    }

    pub fn turn_off(device_id: DeviceId) -> Self {
        Self {
            device_id,
            kind: ActionKind::TurnOff,
            argument: None,
        }
    }

    pub fn set_value(device_id: DeviceId, value: Scalar) -> Self {
        Self {
            device_id,
            kind: ActionKind::SetValue,
            argument: Some(value),
        }
    }

    /// Argument shape check; capability is checked against the device separately.
    pub fn validate_shape(&self) -> Result<(), ModelError> {
        match (self.kind, &self.argument) {
            (ActionKind::SetValue, None) => Err(ModelError::InvalidAction(
                "set_value requires an argument".into(),
            )),
            (ActionKind::TurnOn | ActionKind::TurnOff, Some(_)) => Err(ModelError::InvalidAction(
                format!("{} takes no argument", self.kind),
            )),
            _ => Ok(()),
        }
    }

    pub fn validate(&self, device: &DeviceDescriptor) -> Result<(), ModelError> {
        self.validate_shape()?;
        if device.id != self.device_id {
            return Err(ModelError::InvalidAction(format!(
                "action targets {} but device is {}",
                self.device_id, device.id
            )));
        }
        if !device.supports(self.kind) {
            return Err(ModelError::InvalidAction(format!(
                "{} does not support {}",
                device.name, self.kind
            )));
        }
        Ok(())
    }

    /// The value a device holds after this action, given its current value.
    pub fn apply(&self, current: &StateValue) -> StateValue {
        match self.kind {
            ActionKind::TurnOn => StateValue::OnOff(true),
            ActionKind::TurnOff => StateValue::OnOff(false),
            ActionKind::SetValue => match &self.argument {
                Some(arg) => {
                    let unit = match (arg.unit.is_empty(), current) {
                        (true, StateValue::Scalar(cur)) => cur.unit.clone(),
                        _ => arg.unit.clone(),
                    };
                    StateValue::Scalar(Scalar::new(arg.value, unit))
                }
                None => current.clone(),
            },
        }
    }

    /// The opposite on/off action, if one exists.
    pub fn inverse(&self) -> Option<Action> {
        match self.kind {
            ActionKind::TurnOn => Some(Action::turn_off(self.device_id.clone())),
            ActionKind::TurnOff => Some(Action::turn_on(self.device_id.clone())),
            ActionKind::SetValue => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toggleable_requires_on_and_off() {
        let mut d = DeviceDescriptor::toggleable("l1", "bedroom light");
        assert!(d.validate().is_ok());
        d.supported_actions = vec![ActionKind::TurnOn];
        assert!(d.validate().is_err());
    }

    #[test]
    fn sensor_supports_nothing() {
        let mut s = DeviceDescriptor::sensor("s1", "motion sensor");
        assert!(s.validate().is_ok());
        s.supported_actions.push(ActionKind::TurnOn);
        assert!(s.validate().is_err());
    }

    #[test]
    fn registry_rejects_duplicates() {
        let mut r = Registry::new();
        r.insert(DeviceDescriptor::toggleable("l1", "bedroom light"))
            .unwrap();
        assert!(r
            .insert(DeviceDescriptor::toggleable("l1", "kitchen light"))
            .is_err());
    }

    #[test]
    fn action_shape() {
        let id = DeviceId::new("t");
        assert!(Action::turn_on(id.clone()).validate_shape().is_ok());
        let bad = Action {
            device_id: id.clone(),
            kind: ActionKind::SetValue,
            argument: None,
        };
        assert!(bad.validate_shape().is_err());
        let bad = Action {
            device_id: id,
            kind: ActionKind::TurnOn,
            argument: Some(Scalar::new(1.0, "")),
        };
        assert!(bad.validate_shape().is_err());
    }

    #[test]
    fn capability_checked() {
        let s = DeviceDescriptor::sensor("s1", "motion sensor");
        assert!(Action::turn_on(s.id.clone()).validate(&s).is_err());
    }

    #[test]
    fn set_value_keeps_unit() {
        let a = Action::set_value(DeviceId::new("t"), Scalar::new(22.0, ""));
        let v = a.apply(&StateValue::Scalar(Scalar::new(20.0, "degrees")));
        assert_eq!(v, StateValue::Scalar(Scalar::new(22.0, "degrees")));
    }

    #[test]
    fn state_value_serde_shape() {
        let v = serde_json::to_string(&StateValue::OnOff(true)).unwrap();
        assert_eq!(v, r#"{"onoff":true}"#);
        let v: StateValue =
            serde_json::from_str(r#"{"scalar":{"value":18.5,"unit":"degrees"}}"#).unwrap();
        assert_eq!(v, StateValue::Scalar(Scalar::new(18.5, "degrees")));
    }
}
