//! BVOL: a minimal bit-exact volume container.
//!
//! ```text
//! offset  size  content
//! 0       5     b"BVOL1"
//! 5       24    three u64 little-endian extents (d0, d1, d2)
//! 29      16    reserved, all zero
//! 45      4·n   f32 little-endian voxels, row-major, d2 innermost
//! ```
//!
//! Only geometry and intensities are stored. Subject id and modality live
//! in the dataset manifest.

use std::fs;
use std::path::Path;

use crate::{Error, FormatError, Result};

use super::Volume;

pub const BVOL_MAGIC: &[u8; 5] = b"BVOL1";
pub const BVOL_HEADER_LEN: usize = 5 + 24 + 16;

pub fn encode_volume(v: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(BVOL_HEADER_LEN + 4 * v.len());
    out.extend_from_slice(BVOL_MAGIC);
    for e in v.shape() {
        out.extend_from_slice(&(e as u64).to_le_bytes());
    }
    out.extend_from_slice(&[0u8; 16]);
    for x in v.voxels() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_volume(bytes: &[u8]) -> Result<Volume, FormatError> {
    if bytes.len() < BVOL_MAGIC.len() || &bytes[..5] != BVOL_MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < BVOL_HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: BVOL_HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let mut ext = [0u64; 3];
    for (k, e) in ext.iter_mut().enumerate() {
        let start = 5 + 8 * k;
        *e = u64::from_le_bytes(bytes[start..start + 8].try_into().expect("8-byte field"));
    }
    if bytes[29..45].iter().any(|&b| b != 0) {
        return Err(FormatError::ReservedNonZero);
    }
    let voxel_bytes = ext
        .iter()
        .try_fold(1u64, |acc, &e| acc.checked_mul(e))
        .and_then(|n| n.checked_mul(4))
        .filter(|_| !ext.contains(&0))
        .ok_or(FormatError::InvalidShape(ext))?;
    let payload = &bytes[BVOL_HEADER_LEN..];
    let actual = payload.len() as u64;
    if actual < voxel_bytes {
        return Err(FormatError::Truncated {
            expected: voxel_bytes,
            actual,
        });
    }
    if actual > voxel_bytes {
        return Err(FormatError::PayloadMismatch {
            shape: ext,
            expected: voxel_bytes,
            actual,
        });
    }
    let shape = ext.map(|e| e as usize);
    let voxels = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Volume::new(shape, voxels).map_err(|_| FormatError::InvalidShape(ext))
}

pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_volume(v)).map_err(|e| Error::io(path, e))
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_volume(&bytes).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}
