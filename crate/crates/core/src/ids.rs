//! Opaque identifiers.
//!
//! Every entity carries a generated id drawn from a wire-safe alphabet
//! (`[A-Za-z0-9._:-]`), so ids can travel in status packets unescaped.
//! Names are display-only and may repeat.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Returns true if `s` is a non-empty string over the wire-safe id alphabet.
pub fn is_safe_id(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b':' | b'-'))
}

/// Lowercase ASCII slug of a display name, or `fallback` if nothing survives.
pub fn slug(name: &str, fallback: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        fallback.to_string()
    } else {
        out
    }
}

/// Smallest `<slug>-<n>` (n ≥ 1) not rejected by `taken`.
pub fn fresh_id(name: &str, fallback: &str, taken: impl Fn(&str) -> bool) -> String {
    let base = slug(name, fallback);
    (1..)
        .map(|n| format!("{base}-{n}"))
        .find(|candidate| !taken(candidate))
        .expect("id space exhausted")
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_type!(
    /// Identifies a sensor kind in the project catalog.
    SensorKindId
);
id_type!(
    /// Identifies a device (the `Object_ID` of a status packet).
    DeviceId
);
id_type!(
    /// Identifies a sensor instance within its device.
    SensorId
);
id_type!(TaskId);
id_type!(ScenarioId);
