use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::format::{validate_value, DataFormat, SensorValue};
use super::geometry::{is_simple_polygon, Point2, Rect};
use super::{ModelError, Violation};
use crate::ids::{fresh_id, is_safe_id, DeviceId, SensorId, SensorKindId};
use crate::time::SimTime;

/// A catalog entry describing one type of sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorKind {
    pub id: SensorKindId,
    pub name: String,
    pub format: DataFormat,
}

/// One sensor mounted on a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorInstance {
    pub id: SensorId,
    pub kind: SensorKindId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<SensorValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_update: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Device {
    pub id: DeviceId,
    pub name: String,
    pub icon_id: String,
    pub sensors: Vec<SensorInstance>,
}

impl Device {
    pub fn sensor(&self, id: &SensorId) -> Option<&SensorInstance> {
        self.sensors.iter().find(|s| &s.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub name: String,
    pub polygon: Vec<Point2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpeningKind {
    Door,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Opening {
    pub kind: OpeningKind,
    pub segment: [Point2; 2],
}

/// Reference to a top-view image drawn under the plan. Never decoded here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    pub image_path: String,
    pub meters_per_pixel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HousePlan {
    pub bounds: Rect,
    #[serde(default)]
    pub rooms: Vec<Room>,
    #[serde(default)]
    pub openings: Vec<Opening>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<Background>,
}

impl HousePlan {
    pub fn new(bounds: Rect) -> Self {
        HousePlan { bounds, rooms: Vec::new(), openings: Vec::new(), background: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub device: DeviceId,
    pub position: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusEntry {
    pub sensor_id: SensorId,
    pub value: Option<SensorValue>,
    pub last_update: Option<SimTime>,
}

/// Snapshot of every sensor on one device, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceStatus {
    pub device_id: DeviceId,
    pub entries: Vec<StatusEntry>,
}

/// The whole modeled house: plan, sensor catalog, devices and placements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct House {
    pub plan: HousePlan,
    #[serde(default)]
    pub sensor_kinds: Vec<SensorKind>,
    #[serde(default)]
    pub devices: Vec<Device>,
    #[serde(default)]
    pub placements: Vec<Placement>,
}

impl House {
    pub fn new(plan: HousePlan) -> Self {
        House { plan, sensor_kinds: Vec::new(), devices: Vec::new(), placements: Vec::new() }
    }

    pub fn kind(&self, id: &SensorKindId) -> Option<&SensorKind> {
        self.sensor_kinds.iter().find(|k| &k.id == id)
    }

    pub fn device(&self, id: &DeviceId) -> Option<&Device> {
        self.devices.iter().find(|d| &d.id == id)
    }

    pub fn placement(&self, id: &DeviceId) -> Option<&Placement> {
        self.placements.iter().find(|p| &p.device == id)
    }

    /// Resolves the data format of one sensor instance.
    pub fn sensor_format(&self, device: &DeviceId, sensor: &SensorId) -> Result<&DataFormat, ModelError> {
        let dev = self.device(device).ok_or_else(|| ModelError::UnknownDevice(device.clone()))?;
        let inst = dev.sensor(sensor).ok_or_else(|| ModelError::UnknownSensor {
            device: device.clone(),
            sensor: sensor.clone(),
        })?;
        self.kind(&inst.kind)
            .map(|k| &k.format)
            .ok_or_else(|| ModelError::UnknownSensorKind(inst.kind.clone()))
    }

    pub fn add_sensor_kind(&mut self, name: &str, format: DataFormat) -> Result<SensorKindId, ModelError> {
        if name.trim().is_empty() {
            return Err(ModelError::EmptyName);
        }
        format.check().map_err(ModelError::InvalidFormat)?;
        let id = SensorKindId(fresh_id(name, "kind", |c| self.sensor_kinds.iter().any(|k| k.id.as_str() == c)));
        self.sensor_kinds.push(SensorKind { id: id.clone(), name: name.to_string(), format });
        Ok(id)
    }

    /// Adds a point-format kind; without explicit bounds the plan bounds apply.
    pub fn add_point_sensor_kind(&mut self, name: &str, bounds: Option<Rect>) -> Result<SensorKindId, ModelError> {
        let bounds = bounds.unwrap_or(self.plan.bounds);
        self.add_sensor_kind(name, DataFormat::Point { bounds })
    }

    /// Creates a device with one unset sensor instance per entry of `kinds`.
    /// A kind may appear more than once.
    pub fn add_device(&mut self, name: &str, kinds: &[SensorKindId], icon_id: &str) -> Result<DeviceId, ModelError> {
        if name.trim().is_empty() {
            return Err(ModelError::EmptyName);
        }
        if kinds.is_empty() {
            return Err(ModelError::EmptySensorList);
        }
        let mut sensors: Vec<SensorInstance> = Vec::with_capacity(kinds.len());
        for kind_id in kinds {
            let kind = self.kind(kind_id).ok_or_else(|| ModelError::UnknownSensorKind(kind_id.clone()))?;
            let id = SensorId(fresh_id(&kind.name, "sensor", |c| sensors.iter().any(|s| s.id.as_str() == c)));
            sensors.push(SensorInstance { id, kind: kind_id.clone(), current: None, last_update: None });
        }
        let id = DeviceId(fresh_id(name, "device", |c| self.devices.iter().any(|d| d.id.as_str() == c)));
        self.devices.push(Device { id: id.clone(), name: name.to_string(), icon_id: icon_id.to_string(), sensors });
        Ok(id)
    }

    /// Removes a device along with its placement.
    pub fn remove_device(&mut self, id: &DeviceId) -> Result<Device, ModelError> {
        let idx = self
            .devices
            .iter()
            .position(|d| &d.id == id)
            .ok_or_else(|| ModelError::UnknownDevice(id.clone()))?;
        self.placements.retain(|p| &p.device != id);
        Ok(self.devices.remove(idx))
    }

    /// Places (or moves) a device on the plan.
    pub fn place_device(&mut self, device: &DeviceId, position: Point2) -> Result<Placement, ModelError> {
        if self.device(device).is_none() {
            return Err(ModelError::UnknownDevice(device.clone()));
        }
        if !position.is_finite() || !self.plan.bounds.contains(position) {
            return Err(ModelError::OutOfBounds { device: device.clone(), x: position.x, y: position.y });
        }
        let placement = Placement { device: device.clone(), position };
        match self.placements.iter_mut().find(|p| &p.device == device) {
            Some(existing) => *existing = placement.clone(),
            None => self.placements.push(placement.clone()),
        }
        Ok(placement)
    }

    pub fn add_room(&mut self, name: &str, polygon: Vec<Point2>) -> Result<(), ModelError> {
        if !is_simple_polygon(&polygon) {
            return Err(ModelError::InvalidGeometry(format!("room `{name}` is not a simple polygon")));
        }
        if let Some(p) = polygon.iter().find(|p| !self.plan.bounds.contains(**p)) {
            return Err(ModelError::InvalidGeometry(format!(
                "room `{name}` vertex ({}, {}) is outside the plan",
                p.x, p.y
            )));
        }
        self.plan.rooms.push(Room { name: name.to_string(), polygon });
        Ok(())
    }

    pub fn add_opening(&mut self, kind: OpeningKind, a: Point2, b: Point2) -> Result<(), ModelError> {
        if a == b || !self.plan.bounds.contains(a) || !self.plan.bounds.contains(b) {
            return Err(ModelError::InvalidGeometry("opening must be a non-degenerate segment inside the plan".into()));
        }
        self.plan.openings.push(Opening { kind, segment: [a, b] });
        Ok(())
    }

    /// Writes a validated value. Writes at an equal timestamp are accepted and
    /// the latest one wins.
    pub fn set_sensor_value(
        &mut self,
        device: &DeviceId,
        sensor: &SensorId,
        value: SensorValue,
        at: SimTime,
    ) -> Result<DeviceStatus, ModelError> {
        let format = self.sensor_format(device, sensor)?;
        validate_value(format, &value).map_err(|v| ModelError::InvalidValue {
            device: device.clone(),
            sensor: sensor.clone(),
            reason: v.0,
        })?;
        let dev = self.devices.iter_mut().find(|d| &d.id == device).expect("resolved above");
        let inst = dev.sensors.iter_mut().find(|s| &s.id == sensor).expect("resolved above");
        if let Some(last) = inst.last_update {
            if at < last {
                return Err(ModelError::TimestampRegression {
                    device: device.clone(),
                    sensor: sensor.clone(),
                    last,
                    at,
                });
            }
        }
        inst.current = Some(value);
        inst.last_update = Some(at);
        self.get_status(device)
    }

    pub fn get_status(&self, device: &DeviceId) -> Result<DeviceStatus, ModelError> {
        let dev = self.device(device).ok_or_else(|| ModelError::UnknownDevice(device.clone()))?;
        Ok(DeviceStatus {
            device_id: dev.id.clone(),
            entries: dev
                .sensors
                .iter()
                .map(|s| StatusEntry { sensor_id: s.id.clone(), value: s.current.clone(), last_update: s.last_update })
                .collect(),
        })
    }

    /// Drops all current readings, returning every sensor to the unset state.
    pub fn clear_readings(&mut self) {
        for s in self.devices.iter_mut().flat_map(|d| d.sensors.iter_mut()) {
            s.current = None;
            s.last_update = None;
        }
    }
}

/// Checks every plan, catalog, device and placement invariant. Each violation
/// carries a path naming the offending entity.
pub fn validate_house(house: &House) -> Vec<Violation> {
    let mut out = Vec::new();
    let plan = &house.plan;
    let bounds = plan.bounds;
    if !bounds.is_proper() {
        out.push(Violation::new("plan.bounds", "plan bounds need positive width and height"));
    }
    if let Some(bg) = &plan.background {
        if bg.image_path.is_empty() {
            out.push(Violation::new("plan.background.image_path", "image path is empty"));
        }
        if !(bg.meters_per_pixel.is_finite() && bg.meters_per_pixel > 0.0) {
            out.push(Violation::new("plan.background.meters_per_pixel", "scale must be positive"));
        }
    }
    for room in &plan.rooms {
        let path = format!("plan.rooms[{}]", room.name);
        if room.polygon.len() < 3 {
            out.push(Violation::new(&path, "room polygon needs at least 3 vertices"));
            continue;
        }
        if let Some(p) = room.polygon.iter().find(|p| !bounds.contains(**p)) {
            out.push(Violation::new(&path, format!("vertex ({}, {}) lies outside the plan bounds", p.x, p.y)));
        }
        if !is_simple_polygon(&room.polygon) {
            out.push(Violation::new(&path, "room polygon is self-intersecting"));
        }
    }
    for (i, opening) in plan.openings.iter().enumerate() {
        let [a, b] = opening.segment;
        let path = format!("plan.openings[{i}]");
        if !bounds.contains(a) || !bounds.contains(b) {
            out.push(Violation::new(&path, "opening endpoint lies outside the plan bounds"));
        }
        if a == b {
            out.push(Violation::new(&path, "opening segment has zero length"));
        }
    }

    let mut kind_ids = HashSet::new();
    for kind in &house.sensor_kinds {
        let path = format!("sensor_kinds[{}]", kind.id);
        if !is_safe_id(kind.id.as_str()) {
            out.push(Violation::new(&path, "id uses characters outside [A-Za-z0-9._:-]"));
        }
        if !kind_ids.insert(&kind.id) {
            out.push(Violation::new(&path, "duplicate sensor kind id"));
        }
        if kind.name.trim().is_empty() {
            out.push(Violation::new(&path, "name is empty"));
        }
        if let Err(e) = kind.format.check() {
            out.push(Violation::new(&path, e));
        }
    }

    let mut device_ids = HashSet::new();
    for dev in &house.devices {
        let path = format!("devices[{}]", dev.id);
        if !is_safe_id(dev.id.as_str()) {
            out.push(Violation::new(&path, "id uses characters outside [A-Za-z0-9._:-]"));
        }
        if !device_ids.insert(&dev.id) {
            out.push(Violation::new(&path, "duplicate device id"));
        }
        if dev.sensors.is_empty() {
            out.push(Violation::new(&path, "device has no sensors"));
        }
        let mut sensor_ids = HashSet::new();
        for s in &dev.sensors {
            let spath = format!("{path}.sensors[{}]", s.id);
            if !is_safe_id(s.id.as_str()) {
                out.push(Violation::new(&spath, "id uses characters outside [A-Za-z0-9._:-]"));
            }
            if !sensor_ids.insert(&s.id) {
                out.push(Violation::new(&spath, "duplicate sensor id within device"));
            }
            match house.kind(&s.kind) {
                None => out.push(Violation::new(&spath, format!("unknown sensor kind `{}`", s.kind))),
                Some(kind) => {
                    if let Some(v) = &s.current {
                        if let Err(e) = validate_value(&kind.format, v) {
                            out.push(Violation::new(&spath, e.0));
                        }
                    }
                }
            }
            if s.current.is_some() != s.last_update.is_some() {
                out.push(Violation::new(&spath, "current value and last_update must be set together"));
            }
        }
    }

    let mut placed = HashSet::new();
    for p in &house.placements {
        let path = format!("placements[{}]", p.device);
        if house.device(&p.device).is_none() {
            out.push(Violation::new(&path, format!("placement references unknown device `{}`", p.device)));
        }
        if !placed.insert(&p.device) {
            out.push(Violation::new(&path, "device is placed more than once"));
        }
        if !p.position.is_finite() || !bounds.contains(p.position) {
            out.push(Violation::new(
                &path,
                format!("position ({}, {}) lies outside the plan bounds", p.position.x, p.position.y),
            ));
        }
    }
    out
}
