//! Binary cache for replicate tensors.
//!
//! Layout (little-endian): magic `APSA`, u32 format version, u32 replicates,
//! u32 parishes, u32 years, then the tensor bits in row-major
//! (replicate, parish, year) order packed LSB-first into bytes.

use std::io::{Read, Write};
use std::path::Path;

use super::panel::ReplicateTensor;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"APSA";
pub const CACHE_VERSION: u32 = 1;

pub fn encode_tensor(t: &ReplicateTensor) -> Vec<u8> {
    let (b, p, y) = t.dims();
    let n_bytes = (b * p * y).div_ceil(8);
    let mut out = Vec::with_capacity(20 + n_bytes);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    for d in [b, p, y] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let bits: Vec<u8> = t.words().iter().flat_map(|w| w.to_le_bytes()).take(n_bytes).collect();
    out.extend_from_slice(&bits);
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<ReplicateTensor> {
    let bad = |msg: &str| Error::InvalidInput(format!("replicate cache: {msg}"));
    if bytes.len() < 20 || &bytes[..4] != CACHE_MAGIC {
        return Err(bad("missing APSA header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4-byte slice"));
    let version = word(4);
    if version != CACHE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let dims = (word(8) as usize, word(12) as usize, word(16) as usize);
    let n_bits = dims
        .0
        .checked_mul(dims.1)
        .and_then(|v| v.checked_mul(dims.2))
        .ok_or_else(|| bad("dimensions overflow"))?;
    let payload = &bytes[20..];
    if payload.len() != n_bits.div_ceil(8) {
        return Err(bad(&format!("expected {} payload bytes, found {}", n_bits.div_ceil(8), payload.len())));
    }
    let mut words = vec![0u64; n_bits.div_ceil(64)];
    for (i, byte) in payload.iter().enumerate() {
        words[i / 8] |= (*byte as u64) << (8 * (i % 8));
    }
    if n_bits % 64 != 0 {
        if let Some(last) = words.last() {
            if last >> (n_bits % 64) != 0 {
                return Err(bad("padding bits are set"));
            }
        }
    }
    Ok(ReplicateTensor::from_words(dims, words))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &ReplicateTensor) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_tensor(t)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<ReplicateTensor> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode_tensor(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut t = ReplicateTensor::zeros(5, 3, 7);
        for (b, p, y) in [(0, 0, 0), (4, 2, 6), (2, 1, 3), (3, 0, 5)] {
            t.set(b, p, y, true);
        }
        let bytes = encode_tensor(&t);
        assert_eq!(&bytes[..4], b"APSA");
        assert_eq!(bytes.len(), 20 + (5 * 3 * 7usize).div_ceil(8));
        assert_eq!(decode_tensor(&bytes).unwrap(), t);
    }

    #[test]
    fn first_bit_is_lsb() {
        let mut t = ReplicateTensor::zeros(1, 1, 9);
        t.set(0, 0, 0, true);
        t.set(0, 0, 8, true);
        let bytes = encode_tensor(&t);
        assert_eq!(&bytes[20..], &[1, 1]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_tensor(b"NOPE").is_err());
        let mut bytes = encode_tensor(&ReplicateTensor::zeros(2, 2, 2));
        bytes[4] = 9;
        assert!(decode_tensor(&bytes).is_err());
        let mut bytes = encode_tensor(&ReplicateTensor::zeros(2, 2, 2));
        bytes.push(0);
        assert!(decode_tensor(&bytes).is_err());
    }
}
