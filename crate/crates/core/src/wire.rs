//! Line protocol spoken with the remote-controlling server.
//!
//! Every record is one UTF-8 line of `|`-separated fields ending in `\n`:
//!
//! ```text
//! STAT|<object_id>|<sensor_id>|<value>|<timestamp>
//! CMD|<command_id>|<object_id>|<sensor_id>|<value>|<issued_at>
//! POLL|<session_id>        -> zero or more CMD lines, then END
//! STAT ... END             -> ACK|<count>
//! ENQ|<CMD line>           -> OK            (mock server control)
//! AVAIL|on / AVAIL|off     -> OK            (mock server control)
//! DUMP                     -> stored STAT lines, then END
//! ```
//!
//! Ids use the safe alphabet and are never escaped. Values escape `\` as
//! `\\`, `|` as `\p` and newline as `\n`. Timestamps are canonical UTC
//! (`YYYY-MM-DDTHH:MM:SS[.mmm]Z`). A service that cannot serve a request
//! answers `ERR|<reason>`.

use crate::ids::{is_safe_id, DeviceId, SensorId};
use crate::time::WallTime;

pub const END: &[u8] = b"END\n";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("malformed line: {0}")]
    MalformedLine(String),
}

fn malformed(reason: impl Into<String>) -> WireError {
    WireError::MalformedLine(reason.into())
}

/// The status record pushed after every applied change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusPacket {
    pub object_id: DeviceId,
    pub sensor_id: SensorId,
    pub sensor_value: String,
    pub timestamp: WallTime,
}

/// A write requested by the remote server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteCommand {
    pub command_id: String,
    pub object_id: DeviceId,
    pub sensor_id: SensorId,
    pub value: String,
    pub issued_at: WallTime,
}

pub fn escape_value(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\p"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_value(escaped: &str) -> Result<String, WireError> {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('p') => out.push('|'),
            Some('n') => out.push('\n'),
            Some(other) => return Err(malformed(format!("bad escape `\\{other}`"))),
            None => return Err(malformed("dangling escape")),
        }
    }
    Ok(out)
}

/// Splits a terminated line into its tag and fields.
fn split_line<'a>(line: &'a [u8], tag: &str, fields: usize) -> Result<Vec<&'a str>, WireError> {
    let text = std::str::from_utf8(line).map_err(|_| malformed("not UTF-8"))?;
    let body = text.strip_suffix('\n').ok_or_else(|| malformed("missing line terminator"))?;
    if body.contains('\n') {
        return Err(malformed("embedded newline"));
    }
    let mut parts = body.split('|');
    match parts.next() {
        Some(t) if t == tag => {}
        Some(t) => return Err(malformed(format!("expected tag `{tag}`, found `{t}`"))),
        None => return Err(malformed("empty line")),
    }
    let rest: Vec<&str> = parts.collect();
    if rest.len() != fields {
        return Err(malformed(format!("`{tag}` needs {fields} fields, found {}", rest.len())));
    }
    Ok(rest)
}

fn id_field<'a>(s: &'a str, what: &str) -> Result<&'a str, WireError> {
    if is_safe_id(s) {
        Ok(s)
    } else {
        Err(malformed(format!("invalid {what} `{s}`")))
    }
}

fn time_field(s: &str) -> Result<WallTime, WireError> {
    WallTime::parse_canonical(s).map_err(|e| malformed(e.to_string()))
}

pub fn encode_status_packet(p: &StatusPacket) -> Vec<u8> {
    debug_assert!(is_safe_id(p.object_id.as_str()) && is_safe_id(p.sensor_id.as_str()));
    format!(
        "STAT|{}|{}|{}|{}\n",
        p.object_id,
        p.sensor_id,
        escape_value(&p.sensor_value),
        p.timestamp
    )
    .into_bytes()
}

pub fn decode_status_packet(line: &[u8]) -> Result<StatusPacket, WireError> {
    let f = split_line(line, "STAT", 4)?;
    Ok(StatusPacket {
        object_id: DeviceId::new(id_field(f[0], "object id")?),
        sensor_id: SensorId::new(id_field(f[1], "sensor id")?),
        sensor_value: unescape_value(f[2])?,
        timestamp: time_field(f[3])?,
    })
}

pub fn encode_command(c: &RemoteCommand) -> Vec<u8> {
    debug_assert!(is_safe_id(&c.command_id));
    format!(
        "CMD|{}|{}|{}|{}|{}\n",
        c.command_id,
        c.object_id,
        c.sensor_id,
        escape_value(&c.value),
        c.issued_at
    )
    .into_bytes()
}

pub fn decode_command(line: &[u8]) -> Result<RemoteCommand, WireError> {
    let f = split_line(line, "CMD", 5)?;
    Ok(RemoteCommand {
        command_id: id_field(f[0], "command id")?.to_string(),
        object_id: DeviceId::new(id_field(f[1], "object id")?),
        sensor_id: SensorId::new(id_field(f[2], "sensor id")?),
        value: unescape_value(f[3])?,
        issued_at: time_field(f[4])?,
    })
}

pub fn encode_poll_request(session_id: &str) -> Vec<u8> {
    format!("POLL|{session_id}\n").into_bytes()
}

pub fn encode_ack(count: usize) -> Vec<u8> {
    format!("ACK|{count}\n").into_bytes()
}

pub fn decode_ack(line: &[u8]) -> Result<usize, WireError> {
    let f = split_line(line, "ACK", 1)?;
    f[0].parse().map_err(|_| malformed(format!("bad ack count `{}`", f[0])))
}

pub fn encode_err(reason: &str) -> Vec<u8> {
    format!("ERR|{}\n", escape_value(reason)).into_bytes()
}

/// Reason text if `line` is an `ERR|…` reply.
pub fn decode_err(line: &[u8]) -> Option<String> {
    let f = split_line(line, "ERR", 1).ok()?;
    unescape_value(f[0]).ok()
}
