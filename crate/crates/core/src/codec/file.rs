//! `.nnb` container: `"NNB1" | F (u8) | R (u8) | payload bits | zero padding`.

use std::path::Path;

use super::{Bitstream, EncodedNetwork, QuantizationSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NNB1";

pub fn to_bytes(enc: &EncodedNetwork) -> Vec<u8> {
    let mut out = Vec::with_capacity(6 + enc.payload.len().div_ceil(8));
    out.extend_from_slice(MAGIC);
    out.push(enc.spec.fractional_bits as u8);
    out.push(enc.spec.range_bits as u8);
    out.extend(enc.payload.to_bytes());
    out
}

/// The payload keeps its zero padding; the decoder tolerates up to 7 trailing zero bits.
pub fn from_bytes(bytes: &[u8]) -> Result<EncodedNetwork> {
    if bytes.len() < 6 {
        return Err(Error::Decode {
            offset: 8 * bytes.len(),
            message: "file shorter than the 6-byte header".into(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Decode {
            offset: 0,
            message: "bad magic, expected NNB1".into(),
        });
    }
    let spec = QuantizationSpec::new(bytes[4] as u32, bytes[5] as u32).map_err(|e| Error::Decode {
        offset: 32,
        message: e.to_string(),
    })?;
    Ok(EncodedNetwork {
        spec,
        payload: Bitstream::from_bytes(&bytes[6..]),
    })
}

pub fn read(path: &Path) -> Result<EncodedNetwork> {
    from_bytes(&std::fs::read(path)?)
}
