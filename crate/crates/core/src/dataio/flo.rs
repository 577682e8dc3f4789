//! Middlebury `.flo`: "PIEH", width and height as little-endian `i32`, then
//! row-major interleaved `(u, v)` as little-endian `f32`.

use std::fs;
use std::path::Path;

use super::{io_err, DataError};
use crate::raster::FlowField;

pub const FLO_MAGIC: &[u8; 4] = b"PIEH";
/// Written for invalid pixels; anything larger than `1e9` reads as invalid.
pub const FLO_UNKNOWN: f32 = 1e10;
const UNKNOWN_THRESHOLD: f32 = 1e9;
const HEADER_LEN: usize = 12;

pub fn encode_flo(flow: &FlowField) -> Result<Vec<u8>, DataError> {
    let (w, h) = flow.dims();
    let dim = |n: usize| i32::try_from(n).map_err(|_| DataError::Invalid(format!("dimension {n} too large")));
    let mut out = Vec::with_capacity(HEADER_LEN + w * h * 8);
    out.extend_from_slice(FLO_MAGIC);
    out.extend_from_slice(&dim(w)?.to_le_bytes());
    out.extend_from_slice(&dim(h)?.to_le_bytes());
    for i in 0..w * h {
        let (u, v) = if flow.valid()[i] {
            let (u, v) = (flow.u()[i], flow.v()[i]);
            if !(u.is_finite() && v.is_finite()) {
                return Err(DataError::NonFinite { x: i % w, y: i / w });
            }
            (u as f32, v as f32)
        } else {
            (FLO_UNKNOWN, FLO_UNKNOWN)
        };
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField, DataError> {
    if bytes.len() < HEADER_LEN {
        return Err(DataError::TruncatedFile { expected: HEADER_LEN, found: bytes.len() });
    }
    if &bytes[..4] != FLO_MAGIC {
        return Err(DataError::BadMagic {
            expected: String::from_utf8_lossy(FLO_MAGIC).into_owned(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(DataError::InvalidHeader(format!("flow size {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| DataError::InvalidHeader(format!("flow size {w}x{h}")))?;
    if bytes.len() < expected {
        return Err(DataError::TruncatedFile { expected, found: bytes.len() });
    }
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    Ok(FlowField::from_fn(w, h, |x, y| {
        let o = HEADER_LEN + (y * w + x) * 8;
        let (u, v) = (f32_at(o), f32_at(o + 4));
        let known = |c: f32| c.is_finite() && c.abs() < UNKNOWN_THRESHOLD;
        (known(u) && known(v)).then_some((u as f64, v as f64))
    }))
}

pub fn write_flo(flow: &FlowField, path: &Path) -> Result<(), DataError> {
    let bytes = encode_flo(flow)?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_flo(path: &Path) -> Result<FlowField, DataError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_flo(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_zero_pixel_is_twenty_bytes() {
        let f = FlowField::zeros(1, 1);
        let bytes = encode_flo(&f).unwrap();
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[..4], b"PIEH");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(decode_flo(&bytes).unwrap(), f);
    }

    #[test]
    fn byte_layout_is_little_endian_interleaved() {
        let f = FlowField::from_fn(2, 1, |x, _| Some((x as f64 + 1.0, -0.5)));
        let bytes = encode_flo(&f).unwrap();
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[16..20], &(-0.5f32).to_le_bytes());
        assert_eq!(&bytes[20..24], &2.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut bytes = encode_flo(&FlowField::zeros(3, 2)).unwrap();
        assert!(matches!(decode_flo(&bytes[..30]), Err(DataError::TruncatedFile { expected: 60, found: 30 })));
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_flo(&bytes), Err(DataError::BadMagic { .. })));
    }

    #[test]
    fn invalid_pixels_survive_and_nan_is_rejected() {
        let f = FlowField::from_fn(2, 2, |x, y| (x != y).then_some((0.25, 4.0)));
        assert_eq!(decode_flo(&encode_flo(&f).unwrap()).unwrap().valid(), f.valid());
        let mut bad = FlowField::zeros(2, 2);
        bad.set(1, 0, f64::NAN, 0.0, true);
        assert!(matches!(encode_flo(&bad), Err(DataError::NonFinite { x: 1, y: 0 })));
    }
}
