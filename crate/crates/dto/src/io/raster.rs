//! Binary relative-depth raster format.
//!
//! Layout: magic `DTO1`, little-endian u32 width, u32 height, then
//! width*height little-endian f32 values, row-major, top-left origin.
//! Total size must be exactly 12 + 4*width*height bytes.

use std::path::Path;

use super::IoError;
use crate::camera::ImageSize;
use crate::depthfit::DepthRaster;

pub const RASTER_MAGIC: [u8; 4] = *b"DTO1";
pub const RASTER_HEADER_LEN: usize = 12;

pub fn encode_raster(raster: &DepthRaster) -> Vec<u8> {
    let mut buf = Vec::with_capacity(RASTER_HEADER_LEN + 4 * raster.values().len());
    buf.extend_from_slice(&RASTER_MAGIC);
    buf.extend_from_slice(&raster.size.width.to_le_bytes());
    buf.extend_from_slice(&raster.size.height.to_le_bytes());
    for v in raster.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_raster(bytes: &[u8]) -> Result<DepthRaster, IoError> {
    if bytes.len() < RASTER_HEADER_LEN {
        return Err(IoError::Raster {
            what: format!("file too short for header ({} bytes)", bytes.len()),
        });
    }
    if bytes[0..4] != RASTER_MAGIC {
        return Err(IoError::Raster {
            what: "bad magic (expected DTO1)".to_string(),
        });
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let height = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let size = ImageSize::new(width, height).map_err(|e| IoError::Raster {
        what: e.to_string(),
    })?;
    let count = width as usize * height as usize;
    let expected = RASTER_HEADER_LEN + 4 * count;
    if bytes.len() != expected {
        return Err(IoError::Raster {
            what: format!(
                "length {} contradicts header {}x{} (expected {expected})",
                bytes.len(),
                width,
                height
            ),
        });
    }
    let mut values = Vec::with_capacity(count);
    for chunk in bytes[RASTER_HEADER_LEN..].chunks_exact(4) {
        values.push(f32::from_le_bytes(chunk.try_into().expect("4 bytes")));
    }
    DepthRaster::new(size, values).map_err(|e| IoError::Raster {
        what: e.to_string(),
    })
}

pub fn read_raster(path: &Path) -> Result<DepthRaster, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    decode_raster(&bytes)
}

pub fn write_raster(path: &Path, raster: &DepthRaster) -> Result<(), IoError> {
    std::fs::write(path, encode_raster(raster)).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster() -> DepthRaster {
        DepthRaster::new(
            ImageSize::new(3, 2).unwrap(),
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        )
        .unwrap()
    }

    #[test]
    fn encode_decode_round_trip() {
        let r = raster();
        let bytes = encode_raster(&r);
        assert_eq!(bytes.len(), 12 + 4 * 6);
        assert_eq!(&bytes[0..4], b"DTO1");
        let back = decode_raster(&bytes).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn decode_rejects_bad_magic() {
        let mut bytes = encode_raster(&raster());
        bytes[0] = b'X';
        assert!(matches!(decode_raster(&bytes), Err(IoError::Raster { .. })));
    }

    #[test]
    fn decode_rejects_length_mismatch() {
        let mut bytes = encode_raster(&raster());
        bytes.pop();
        assert!(matches!(decode_raster(&bytes), Err(IoError::Raster { .. })));
        bytes.push(0);
        bytes.push(0);
        assert!(matches!(decode_raster(&bytes), Err(IoError::Raster { .. })));
    }

    #[test]
    fn decode_rejects_nonfinite_values() {
        let mut bytes = encode_raster(&raster());
        bytes[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_raster(&bytes), Err(IoError::Raster { .. })));
    }

    #[test]
    fn decode_rejects_zero_dimension() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"DTO1");
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        assert!(matches!(decode_raster(&bytes), Err(IoError::Raster { .. })));
    }
}
