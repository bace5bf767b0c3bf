//! Virtual and wall-clock time.
//!
//! Simulation time is integer milliseconds since the run epoch. Wall-clock
//! instants only appear in project files and on the wire, always rendered
//! as `YYYY-MM-DDTHH:MM:SS[.mmm]Z`.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, TimeZone, Utc};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// Virtual timestamp: milliseconds since the simulation epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * 1000)
    }

    pub fn as_ms(self) -> u64 {
        self.0
    }

    pub fn to_wall(self, epoch: WallTime) -> WallTime {
        WallTime(epoch.0 + self.0 as i64)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;

    fn add(self, ms: u64) -> SimTime {
        SimTime(self.0 + ms)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Wall-clock instant in UTC, millisecond resolution (ms since Unix epoch).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WallTime(pub i64);

/// Largest instant with a four-digit year: 9999-12-31T23:59:59.999Z.
pub const MAX_WALL_MS: i64 = 253_402_300_799_999;
/// 0000-01-01T00:00:00Z.
pub const MIN_WALL_MS: i64 = -62_167_219_200_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp `{0}`")]
pub struct TimeParseError(pub String);

impl WallTime {
    pub fn from_ymd_hms(y: i32, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> Self {
        let dt = Utc
            .with_ymd_and_hms(y, mo, d, h, mi, s)
            .single()
            .expect("valid calendar date");
        WallTime(dt.timestamp_millis())
    }

    pub fn as_millis(self) -> i64 {
        self.0
    }

    /// Virtual time of this instant relative to `epoch`; `None` before the epoch.
    pub fn to_virtual(self, epoch: WallTime) -> Option<SimTime> {
        u64::try_from(self.0 - epoch.0).ok().map(SimTime)
    }

    fn to_chrono(self) -> Option<DateTime<Utc>> {
        DateTime::from_timestamp_millis(self.0)
    }

    /// Strict parser for the canonical form only. A `.000` fraction is
    /// rejected because the canonical rendering omits it.
    pub fn parse_canonical(s: &str) -> Result<Self, TimeParseError> {
        let err = || TimeParseError(s.to_string());
        let b = s.as_bytes();
        let shape_ok = (b.len() == 20 || b.len() == 24)
            && b[4] == b'-'
            && b[7] == b'-'
            && b[10] == b'T'
            && b[13] == b':'
            && b[16] == b':'
            && b[b.len() - 1] == b'Z';
        if !shape_ok {
            return Err(err());
        }
        let digits = |r: std::ops::Range<usize>| -> Result<u32, TimeParseError> {
            let part = &b[r];
            if part.iter().all(u8::is_ascii_digit) {
                Ok(part.iter().fold(0u32, |acc, d| acc * 10 + u32::from(d - b'0')))
            } else {
                Err(err())
            }
        };
        let year = digits(0..4)? as i32;
        let month = digits(5..7)?;
        let day = digits(8..10)?;
        let hour = digits(11..13)?;
        let minute = digits(14..16)?;
        let second = digits(17..19)?;
        let millis = if b.len() == 24 {
            if b[19] != b'.' {
                return Err(err());
            }
            let ms = digits(20..23)?;
            if ms == 0 {
                return Err(err());
            }
            ms
        } else {
            0
        };
        let date = NaiveDate::from_ymd_opt(year, month, day).ok_or_else(err)?;
        let time = NaiveTime::from_hms_milli_opt(hour, minute, second, millis).ok_or_else(err)?;
        let ms = NaiveDateTime::new(date, time).and_utc().timestamp_millis();
        Ok(WallTime(ms))
    }

    /// Lenient parser for hand-written files: any RFC 3339 instant with at
    /// most millisecond precision.
    pub fn parse_rfc3339(s: &str) -> Result<Self, TimeParseError> {
        let dt = DateTime::parse_from_rfc3339(s).map_err(|_| TimeParseError(s.to_string()))?;
        if dt.timestamp_subsec_nanos() % 1_000_000 != 0 {
            return Err(TimeParseError(s.to_string()));
        }
        Ok(WallTime(dt.timestamp_millis()))
    }
}

impl fmt::Display for WallTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(dt) = self.to_chrono() else {
            return write!(f, "<out of range: {}ms>", self.0);
        };
        if self.0.rem_euclid(1000) == 0 {
            write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%SZ"))
        } else {
            write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%S%.3fZ"))
        }
    }
}

impl FromStr for WallTime {
    type Err = TimeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WallTime::parse_canonical(s).or_else(|_| WallTime::parse_rfc3339(s))
    }
}

impl Serialize for WallTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WallTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}
