//! Sensor data formats and the values they admit.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::geometry::{Point2, Rect};

/// The value space a sensor kind reports in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataFormat {
    /// Closed decimal range `[min, max]` with a display unit.
    Numeral {
        min: f64,
        max: f64,
        #[serde(default)]
        unit: String,
    },
    /// Ordered enumeration of named states, matched case-sensitively.
    MultiState { states: Vec<String> },
    /// A 2D coordinate inside `bounds` (plan meters).
    Point { bounds: Rect },
}

impl DataFormat {
    pub fn numeral(min: f64, max: f64, unit: impl Into<String>) -> Self {
        DataFormat::Numeral { min, max, unit: unit.into() }
    }

    pub fn multi_state<S: Into<String>>(states: impl IntoIterator<Item = S>) -> Self {
        DataFormat::MultiState { states: states.into_iter().map(Into::into).collect() }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DataFormat::Numeral { .. } => "numeral",
            DataFormat::MultiState { .. } => "multi-state",
            DataFormat::Point { .. } => "point",
        }
    }

    /// Checks the format's own invariants.
    pub fn check(&self) -> Result<(), String> {
        match self {
            DataFormat::Numeral { min, max, .. } => {
                if !min.is_finite() || !max.is_finite() {
                    return Err(format!("numeral bounds must be finite (min={min}, max={max})"));
                }
                if min >= max {
                    return Err(format!("numeral range is empty (min={min} >= max={max})"));
                }
                Ok(())
            }
            DataFormat::MultiState { states } => {
                if states.len() < 2 {
                    return Err(format!("multi-state needs at least 2 states, got {}", states.len()));
                }
                for (i, s) in states.iter().enumerate() {
                    if s.is_empty() {
                        return Err(format!("state #{i} has an empty name"));
                    }
                    if states[..i].contains(s) {
                        return Err(format!("duplicate state name `{s}`"));
                    }
                }
                Ok(())
            }
            DataFormat::Point { bounds } => {
                if bounds.is_proper() {
                    Ok(())
                } else {
                    Err("point bounds need positive width and height".to_string())
                }
            }
        }
    }
}

/// A reading or setpoint. Only meaningful relative to a [`DataFormat`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SensorValue {
    Number(f64),
    State(String),
    Position { x: f64, y: f64 },
}

impl SensorValue {
    pub fn state(name: impl Into<String>) -> Self {
        SensorValue::State(name.into())
    }

    /// Text form used on the wire and in exported logs: shortest round-trip
    /// decimal for numbers, the bare name for states, `x,y` for positions.
    pub fn to_text(&self) -> String {
        match self {
            SensorValue::Number(v) => v.to_string(),
            SensorValue::State(s) => s.clone(),
            SensorValue::Position { x, y } => format!("{x},{y}"),
        }
    }

    /// Parses the text form according to `format`. Range checks are left to
    /// [`validate_value`].
    pub fn parse_text(format: &DataFormat, text: &str) -> Result<SensorValue, ValueViolation> {
        let number = |t: &str| -> Result<f64, ValueViolation> {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| ValueViolation(format!("`{t}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ValueViolation(format!("`{t}` is not finite")))
            }
        };
        match format {
            DataFormat::Numeral { .. } => Ok(SensorValue::Number(number(text)?)),
            DataFormat::MultiState { .. } => Ok(SensorValue::State(text.to_string())),
            DataFormat::Point { .. } => {
                let (x, y) = text
                    .split_once(',')
                    .ok_or_else(|| ValueViolation(format!("`{text}` is not an `x,y` position")))?;
                Ok(SensorValue::Position { x: number(x)?, y: number(y)? })
            }
        }
    }
}

impl fmt::Display for SensorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Why a value does not fit a format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueViolation(pub String);

impl fmt::Display for ValueViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValueViolation {}

/// Total check of `value` against `format`. Numeral ranges and point bounds
/// are inclusive; state names compare case-sensitively.
pub fn validate_value(format: &DataFormat, value: &SensorValue) -> Result<(), ValueViolation> {
    match (format, value) {
        (DataFormat::Numeral { min, max, unit }, SensorValue::Number(v)) => {
            if v.is_finite() && *min <= *v && *v <= *max {
                Ok(())
            } else {
                Err(ValueViolation(format!("{v} is outside [{min}, {max}] {unit}").trim_end().to_string()))
            }
        }
        (DataFormat::MultiState { states }, SensorValue::State(s)) => {
            if states.iter().any(|candidate| candidate == s) {
                Ok(())
            } else {
                Err(ValueViolation(format!("`{s}` is not one of [{}]", states.join(", "))))
            }
        }
        (DataFormat::Point { bounds }, SensorValue::Position { x, y }) => {
            let p = Point2::new(*x, *y);
            if p.is_finite() && bounds.contains(p) {
                Ok(())
            } else {
                Err(ValueViolation(format!(
                    "({x}, {y}) is outside [{}, {}]x[{}, {}]",
                    bounds.min.x, bounds.max.x, bounds.min.y, bounds.max.y
                )))
            }
        }
        (format, value) => Err(ValueViolation(format!(
            "{} value `{value}` does not fit a {} sensor",
            value_label(value),
            format.label()
        ))),
    }
}

fn value_label(v: &SensorValue) -> &'static str {
    match v {
        SensorValue::Number(_) => "number",
        SensorValue::State(_) => "state",
        SensorValue::Position { .. } => "position",
    }
}
