//! House model: plan geometry, sensor catalog, devices and their state.

mod format;
mod geometry;
mod house;

use std::fmt;

pub use format::{validate_value, DataFormat, SensorValue, ValueViolation};
pub use geometry::{is_simple_polygon, round_mm, segments_intersect, Point2, Rect};
pub use house::{
    validate_house, Background, Device, DeviceStatus, House, HousePlan, Opening, OpeningKind, Placement, Room,
    SensorInstance, SensorKind, StatusEntry,
};

use crate::ids::{DeviceId, SensorId, SensorKindId};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("name must not be empty")]
    EmptyName,
    #[error("invalid data format: {0}")]
    InvalidFormat(String),
    #[error("unknown sensor kind `{0}`")]
    UnknownSensorKind(SensorKindId),
    #[error("a device needs at least one sensor")]
    EmptySensorList,
    #[error("unknown device `{0}`")]
    UnknownDevice(DeviceId),
    #[error("device `{device}` has no sensor `{sensor}`")]
    UnknownSensor { device: DeviceId, sensor: SensorId },
    #[error("position ({x}, {y}) for device `{device}` is outside the plan")]
    OutOfBounds { device: DeviceId, x: f64, y: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid value for `{device}`/`{sensor}`: {reason}")]
    InvalidValue { device: DeviceId, sensor: SensorId, reason: String },
    #[error("timestamp regression on `{device}`/`{sensor}`: {at} is before last update {last}")]
    TimestampRegression { device: DeviceId, sensor: SensorId, last: SimTime, at: SimTime },
}

/// One broken rule, located by a path into the project.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

impl Violation {
    pub fn new(path: &str, rule: impl Into<String>) -> Self {
        Violation { path: path.to_string(), rule: rule.into() }
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.path = format!("{prefix}.{}", self.path);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.rule)
    }
}
