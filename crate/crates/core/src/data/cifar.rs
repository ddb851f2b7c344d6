//! CIFAR-10 binary batches: 1 label byte + 3072 pixel bytes per record,
//! pixels as R, G, B planes of 32x32.

use std::fs;
use std::path::Path;

use crate::error::{Error, IoContext, Result};
use crate::tensor::Tensor4;

use super::{Dataset, SplitTag};

const SIDE: usize = 32;
const PIXELS: usize = 3 * SIDE * SIDE;
pub const CIFAR_RECORD_LEN: usize = 1 + PIXELS;

/// Standard file names, training batches first.
pub const CIFAR_BATCH_FILES: [&str; 6] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
    "test_batch.bin",
];

pub fn parse_cifar_batch(bytes: &[u8]) -> Result<Dataset> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        let whole = bytes.len() / CIFAR_RECORD_LEN;
        return Err(Error::parse(
            whole * CIFAR_RECORD_LEN,
            format!(
                "size {} is not a multiple of {CIFAR_RECORD_LEN} (1 label byte + 3*32*32 pixel bytes); \
                 {whole} whole records then {} stray bytes",
                bytes.len(),
                bytes.len() % CIFAR_RECORD_LEN
            ),
        ));
    }
    let n = bytes.len() / CIFAR_RECORD_LEN;
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * PIXELS);
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        if rec[0] > 9 {
            return Err(Error::parse(
                i * CIFAR_RECORD_LEN,
                format!("label {} out of range 0..9", rec[0]),
            ));
        }
        labels.push(rec[0]);
        data.extend(rec[1..].iter().map(|&b| f64::from(b) / 255.0));
    }
    Dataset::new(
        Tensor4::from_vec([n, 3, SIDE, SIDE], data)?,
        labels,
        SplitTag::Raw,
    )
}

/// Inverse of [`parse_cifar_batch`] for (3,32,32) samples in [0,1].
pub fn write_cifar_batch(ds: &Dataset) -> Result<Vec<u8>> {
    let shape = ds.sample_shape();
    if (shape.c, shape.h, shape.w) != (3, SIDE, SIDE) {
        return Err(Error::shape(
            0,
            format!("CIFAR records are (3,32,32), got {shape}"),
        ));
    }
    let mut out = Vec::with_capacity(ds.len() * CIFAR_RECORD_LEN);
    for (i, &label) in ds.labels.iter().enumerate() {
        out.push(label);
        out.extend(
            ds.samples
                .sample(i)
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
    }
    Ok(out)
}

/// Loads every standard batch file present under `dir`, in the standard
/// order, as one unsplit dataset.
pub fn load_cifar10(dir: &Path) -> Result<Dataset> {
    let mut parts = Vec::new();
    for name in CIFAR_BATCH_FILES {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        let bytes = fs::read(&path).at(&path)?;
        let ds = parse_cifar_batch(&bytes).map_err(|e| match e {
            Error::Parse { offset, msg } => Error::Parse {
                offset,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })?;
        parts.push(ds);
    }
    if parts.is_empty() {
        return Err(Error::Missing {
            what: "CIFAR-10 batch files",
            id: dir.display().to_string(),
        });
    }
    Dataset::concat(&parts, SplitTag::Raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(n: usize) -> Vec<u8> {
        let mut b = Vec::new();
        for i in 0..n {
            b.push((i % 10) as u8);
            b.extend((0..PIXELS).map(|p| ((p * 7 + i * 13) % 256) as u8));
        }
        b
    }

    #[test]
    fn parses_records() {
        let mut bytes = batch(3);
        bytes[CIFAR_RECORD_LEN] = 7;
        let ds = parse_cifar_batch(&bytes).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels[1], 7);
        assert_eq!(ds.sample_shape(), crate::tensor::Shape3::new(3, 32, 32));
        assert!(ds.samples.data().iter().all(|v| (0.0..=1.0).contains(v)));
        // second byte of the record is the first red pixel
        assert_eq!(ds.samples.get(0, 0, 0, 0), f64::from(bytes[1]) / 255.0);
        assert_eq!(
            ds.samples.get(0, 1, 0, 0),
            f64::from(bytes[1 + 1024]) / 255.0
        );
    }

    #[test]
    fn truncated_is_rejected() {
        let bytes = batch(2);
        let err = parse_cifar_batch(&bytes[..bytes.len() - 5]).unwrap_err();
        match err {
            Error::Parse { offset, msg } => {
                assert_eq!(offset, CIFAR_RECORD_LEN);
                assert!(msg.contains("3073"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn round_trip_bytes() {
        let bytes = batch(4);
        assert_eq!(
            write_cifar_batch(&parse_cifar_batch(&bytes).unwrap()).unwrap(),
            bytes
        );
    }

    #[test]
    fn loads_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("data_batch_1.bin"), batch(2)).unwrap();
        fs::write(dir.path().join("test_batch.bin"), batch(1)).unwrap();
        assert_eq!(load_cifar10(dir.path()).unwrap().len(), 3);
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_cifar10(empty.path()),
            Err(Error::Missing { .. })
        ));
    }
}
