//! `LSTMCS01` model files.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "LSTMCS01"
//! 8       4     M        (u32 LE)
//! 12      4     N        (u32 LE)
//! 16      4     ncell    (u32 LE)
//! 20      4     variant  (u32 LE; 0 = full, 1 = reduced)
//! 24      4     reserved (u32 LE; written as 0, no seed is stored)
//! 28      ...   W1..W4, Wrec1..Wrec4, Wp1..Wp3, b1..b4, U
//!               row-major f64 LE
//! end-4   4     CRC-32 (IEEE) of every preceding byte
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::lstm::{LstmDims, LstmParams, Variant, TENSOR_COUNT};

pub const MAGIC: &[u8; 8] = b"LSTMCS01";
const HEADER_LEN: usize = 8 + 5 * 4;

/// Exact size in bytes of a serialized model.
pub fn encoded_len(dims: LstmDims) -> usize {
    HEADER_LEN + 8 * dims.parameter_count() + 4
}

pub fn serialize(params: &LstmParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(params.dims));
    out.extend_from_slice(MAGIC);
    for field in [
        params.dims.m as u32,
        params.dims.n as u32,
        params.dims.ncell as u32,
        params.variant.code(),
        0,
    ] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    for tensor in params.tensors() {
        for x in tensor {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

pub fn deserialize(bytes: &[u8]) -> Result<LstmParams> {
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            needed: 8,
            available: bytes.len(),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::BadMagic {
            found: bytes[..8].try_into().expect("8 bytes"),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let dims = LstmDims::new(
        read_u32(bytes, 8) as usize,
        read_u32(bytes, 12) as usize,
        read_u32(bytes, 16) as usize,
    );
    let code = read_u32(bytes, 20);
    let variant = Variant::from_code(code).ok_or_else(|| Error::Format(format!("unknown variant code {code}")))?;
    if dims.m == 0 || dims.n == 0 || dims.ncell == 0 {
        return Err(Error::Format(format!("zero dimension in header: {dims:?}")));
    }
    let needed = encoded_len(dims);
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::Format(format!("{} trailing bytes after checksum", bytes.len() - needed)));
    }
    let stored = read_u32(bytes, needed - 4);
    let computed = crc32fast::hash(&bytes[..needed - 4]);
    if stored != computed {
        return Err(Error::CrcMismatch { stored, computed });
    }

    let mut params = LstmParams::zeros(dims, variant);
    let mut offset = HEADER_LEN;
    for tensor in params.tensors_mut() {
        for x in tensor.iter_mut() {
            *x = f64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8 bytes"));
            offset += 8;
        }
        if tensor.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("non-finite parameter value".into()));
        }
    }
    debug_assert_eq!(offset, needed - 4);
    debug_assert_eq!(params.tensors().len(), TENSOR_COUNT);
    Ok(params)
}

pub fn save(params: &LstmParams, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, serialize(params))
}

/// Reads a model file; I/O failures are reported as [`Error::Format`] with the path.
pub fn load(path: &Path) -> Result<LstmParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    deserialize(&bytes)
}
