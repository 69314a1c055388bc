//! Representation dump files.
//!
//! Layout: 16-byte little-endian header
//! `magic "EVTR" | u8 method id | u8 reserved | u16 C | u16 H | u16 W | u32 reserved`
//! followed by `C*H*W` little-endian 32-bit floats, row-major `(c, y, x)`.

use super::{ReprConfig, ReprError, ReprMethod, RepresentationTensor};

pub const DUMP_MAGIC: &[u8; 4] = b"EVTR";
pub const DUMP_HEADER_BYTES: usize = 16;

/// Serialize a tensor. Values are narrowed to f32.
pub fn write_dump(rep: &RepresentationTensor) -> Result<Vec<u8>, ReprError> {
    let c = u16::try_from(rep.channels).map_err(|_| ReprError::Dump("C > u16".into()))?;
    let h = u16::try_from(rep.height).map_err(|_| ReprError::Dump("H > u16".into()))?;
    let w = u16::try_from(rep.width).map_err(|_| ReprError::Dump("W > u16".into()))?;
    let mut out = Vec::with_capacity(DUMP_HEADER_BYTES + rep.data.len() * 4);
    out.extend_from_slice(DUMP_MAGIC);
    out.push(rep.method.id());
    out.push(0);
    out.extend_from_slice(&c.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in &rep.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parse a dump produced by [`write_dump`]. The tensor's `meta` is filled
/// with default parameters; the file carries only method and dimensions.
pub fn read_dump(bytes: &[u8]) -> Result<RepresentationTensor, ReprError> {
    if bytes.len() < DUMP_HEADER_BYTES {
        return Err(ReprError::Dump("short header".into()));
    }
    if &bytes[0..4] != DUMP_MAGIC {
        return Err(ReprError::Dump("bad magic".into()));
    }
    let method = ReprMethod::from_id(bytes[4])
        .ok_or_else(|| ReprError::Dump(format!("unknown method id {}", bytes[4])))?;
    let c = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let h = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let w = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
    let expected = DUMP_HEADER_BYTES + c * h * w * 4;
    if bytes.len() != expected {
        return Err(ReprError::Dump(format!(
            "payload size mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let data = bytes[DUMP_HEADER_BYTES..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(RepresentationTensor {
        data,
        channels: c,
        height: h,
        width: w,
        method,
        meta: ReprConfig::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, EventStream, SensorGeometry, TimeDomain};

    #[test]
    fn dump_round_trips_dims_method_and_f32_data() {
        let s = EventStream::new(
            vec![Event::new(1, 2, 0.25, 1.0), Event::new(3, 0, 0.75, -1.0)],
            SensorGeometry::new(5, 4),
            TimeDomain::NormalizedUnit,
        );
        let rep = super::super::est(&s, &ReprConfig::with_bins(2)).unwrap();
        let bytes = write_dump(&rep).unwrap();
        assert_eq!(&bytes[0..4], b"EVTR");
        assert_eq!(bytes.len(), DUMP_HEADER_BYTES + rep.data.len() * 4);
        let back = read_dump(&bytes).unwrap();
        assert_eq!(back.method, rep.method);
        assert_eq!(
            (back.channels, back.height, back.width),
            (rep.channels, rep.height, rep.width)
        );
        for (a, b) in rep.data.iter().zip(&back.data) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn dump_rejects_corrupt_input() {
        assert!(read_dump(b"EVT").is_err());
        assert!(read_dump(b"XXXX000000000000").is_err());
        let mut ok = write_dump(&RepresentationTensor::zeros(
            1,
            2,
            2,
            ReprMethod::EventFrame,
            ReprConfig::default(),
        ))
        .unwrap();
        ok.pop();
        assert!(read_dump(&ok).is_err());
    }
}
