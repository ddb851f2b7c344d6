//! EVOD: cached encoded datasets. Little-endian: magic, u32 version, u64
//! count, u32 c/h/w, f32 samples, u8 labels.

use std::fs;
use std::path::Path;

use crate::error::{Error, IoContext, Result};
use crate::tensor::Tensor4;

use super::{Dataset, SplitTag};

const MAGIC: &[u8; 4] = b"EVOD";
pub const EVOD_VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 8 + 12;

pub fn encode_evod(ds: &Dataset) -> Vec<u8> {
    let s = ds.sample_shape();
    let mut out = Vec::with_capacity(HEADER + ds.samples.len() * 4 + ds.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&EVOD_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    for d in [s.c, s.h, s.w] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in ds.samples.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.extend_from_slice(&ds.labels);
    out
}

pub fn decode_evod(bytes: &[u8], tag: SplitTag) -> Result<Dataset> {
    if bytes.len() < HEADER {
        return Err(Error::parse(bytes.len(), "truncated EVOD header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::parse(0, "bad magic, expected EVOD"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != EVOD_VERSION {
        return Err(Error::UnsupportedVersion {
            what: "EVOD",
            found: version,
            expected: EVOD_VERSION,
        });
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let (c, h, w) = (
        u32_at(16) as usize,
        u32_at(20) as usize,
        u32_at(24) as usize,
    );
    let floats = count
        .checked_mul(c * h * w)
        .ok_or_else(|| Error::parse(8, "sample count overflows"))?;
    let expected = HEADER + floats * 4 + count;
    if bytes.len() != expected {
        return Err(Error::parse(
            bytes.len().min(expected),
            format!(
                "expected {expected} bytes for {count} samples of ({c},{h},{w}), found {}",
                bytes.len()
            ),
        ));
    }
    let data_end = HEADER + floats * 4;
    let data = bytes[HEADER..data_end]
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
        .collect();
    Dataset::new(
        Tensor4::from_vec([count, c, h, w], data)?,
        bytes[data_end..].to_vec(),
        tag,
    )
}

pub fn write_evod(path: &Path, ds: &Dataset) -> Result<()> {
    let tmp = path.with_extension("evod.tmp");
    fs::write(&tmp, encode_evod(ds)).at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

pub fn read_evod(path: &Path, tag: SplitTag) -> Result<Dataset> {
    decode_evod(&fs::read(path).at(path)?, tag)
}
