//! Binary and CSV event codecs.
//!
//! The binary format is the 40-bit big-endian record layout used by common
//! ATIS recordings: byte 0 = x, byte 1 = y, bit 7 of byte 2 = polarity
//! (1 is positive), remaining 23 bits = timestamp in microseconds. The CSV
//! format is one `x,y,t,p` line per event, LF-terminated UTF-8, meant for
//! tests and debugging.

use super::{Event, EventStream, SensorGeometry, TimeDomain};
use thiserror::Error;

/// Record size of the binary format in bytes.
pub const BIN_RECORD_BYTES: usize = 5;
/// Exclusive upper bound of the 23-bit timestamp field, in microseconds.
pub const MAX_BIN_TIMESTAMP: f64 = (1u32 << 23) as f64;

/// Geometry assumed when none is supplied: the full 8-bit addressable grid.
pub const DEFAULT_BIN_GEOMETRY: SensorGeometry = SensorGeometry {
    width: 256,
    height: 256,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("truncated record: {len} bytes is not a multiple of {BIN_RECORD_BYTES}")]
    TruncatedRecord { len: usize },
    #[error("record {index}: coordinate ({x},{y}) outside {width}x{height}")]
    CoordinateOutOfRange {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("event {index}: {field} = {value} exceeds its bit budget")]
    FieldOverflow {
        index: usize,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("binary codec requires raw-microsecond timestamps")]
    WrongTimeDomain,
}

/// Decode 5-byte big-endian records into a raw-microsecond stream.
///
/// Events are stably sorted by timestamp if the input is unordered. With no
/// geometry the full 256x256 addressable grid is attached; with one,
/// coordinates are checked against it.
pub fn parse_bin(
    bytes: &[u8],
    geometry: Option<SensorGeometry>,
) -> Result<EventStream, CodecError> {
    if !bytes.len().is_multiple_of(BIN_RECORD_BYTES) {
        return Err(CodecError::TruncatedRecord { len: bytes.len() });
    }
    let geometry = geometry.unwrap_or(DEFAULT_BIN_GEOMETRY);
    let mut events = Vec::with_capacity(bytes.len() / BIN_RECORD_BYTES);
    for (index, rec) in bytes.chunks_exact(BIN_RECORD_BYTES).enumerate() {
        let x = rec[0] as u16;
        let y = rec[1] as u16;
        if !geometry.contains(x, y) {
            return Err(CodecError::CoordinateOutOfRange {
                index,
                x,
                y,
                width: geometry.width,
                height: geometry.height,
            });
        }
        let p = if rec[2] & 0x80 != 0 { 1.0 } else { -1.0 };
        let t = (((rec[2] & 0x7f) as u32) << 16 | (rec[3] as u32) << 8 | rec[4] as u32) as f64;
        events.push(Event { x, y, t, p });
    }
    let mut stream = EventStream::new(events, geometry, TimeDomain::RawMicroseconds);
    stream.sort_by_time();
    Ok(stream)
}

/// Encode a raw-microsecond stream into 5-byte records; exact inverse of
/// [`parse_bin`]. Timestamps must be whole microseconds below 2^23 and
/// coordinates below 256, otherwise [`CodecError::FieldOverflow`].
pub fn write_bin(stream: &EventStream) -> Result<Vec<u8>, CodecError> {
    if stream.time_domain != TimeDomain::RawMicroseconds {
        return Err(CodecError::WrongTimeDomain);
    }
    let mut out = Vec::with_capacity(stream.len() * BIN_RECORD_BYTES);
    for (index, e) in stream.events.iter().enumerate() {
        if e.x > 0xff {
            return Err(CodecError::FieldOverflow {
                index,
                field: "x",
                value: e.x as f64,
            });
        }
        if e.y > 0xff {
            return Err(CodecError::FieldOverflow {
                index,
                field: "y",
                value: e.y as f64,
            });
        }
        if !(0.0..MAX_BIN_TIMESTAMP).contains(&e.t) {
            return Err(CodecError::FieldOverflow {
                index,
                field: "t",
                value: e.t,
            });
        }
        let t = e.t as u32;
        let p_bit = if e.p > 0.0 { 0x80u8 } else { 0 };
        out.push(e.x as u8);
        out.push(e.y as u8);
        out.push(p_bit | ((t >> 16) as u8 & 0x7f));
        out.push((t >> 8) as u8);
        out.push(t as u8);
    }
    Ok(out)
}

/// Parse `x,y,t,p` lines. Polarity must parse to exactly `+1` or `-1`.
/// The caller declares which time domain the file's timestamps are in.
pub fn parse_csv(
    text: &str,
    geometry: Option<SensorGeometry>,
    time_domain: TimeDomain,
) -> Result<EventStream, CodecError> {
    let geometry = geometry.unwrap_or(DEFAULT_BIN_GEOMETRY);
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let malformed = |reason: &str| CodecError::MalformedLine {
            line: lineno,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(malformed(&format!("expected 4 fields, got {}", fields.len())));
        }
        let x: u16 = fields[0].trim().parse().map_err(|_| malformed("bad x"))?;
        let y: u16 = fields[1].trim().parse().map_err(|_| malformed("bad y"))?;
        let t: f64 = fields[2].trim().parse().map_err(|_| malformed("bad t"))?;
        if !t.is_finite() {
            return Err(malformed("non-finite t"));
        }
        let p: f64 = fields[3].trim().parse().map_err(|_| malformed("bad p"))?;
        if p != 1.0 && p != -1.0 {
            return Err(malformed("polarity must be +1 or -1"));
        }
        if !geometry.contains(x, y) {
            return Err(CodecError::CoordinateOutOfRange {
                index: i,
                x,
                y,
                width: geometry.width,
                height: geometry.height,
            });
        }
        events.push(Event { x, y, t, p });
    }
    let mut stream = EventStream::new(events, geometry, time_domain);
    stream.sort_by_time();
    Ok(stream)
}

/// Write `x,y,t,p` lines, LF after every line. Timestamps use the shortest
/// decimal form that parses back to the same f64, so round-trips are exact.
pub fn write_csv(stream: &EventStream) -> String {
    let mut out = String::new();
    for e in &stream.events {
        out.push_str(&format!("{},{},{},{}\n", e.x, e.y, e.t, e.p as i64));
    }
    out
}
