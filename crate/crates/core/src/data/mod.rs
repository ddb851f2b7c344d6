//! Datasets, stratified splits, batching and re-encoding.

mod cifar;
mod evod;
mod synth;

use std::fmt;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::seed;
use crate::tensor::{Shape3, Tensor4};

pub use cifar::{
    load_cifar10, parse_cifar_batch, write_cifar_batch, CIFAR_BATCH_FILES, CIFAR_RECORD_LEN,
};
pub use evod::{decode_evod, encode_evod, read_evod, write_evod, EVOD_VERSION};
pub use synth::{synth_dataset, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitTag {
    /// Not yet split.
    Raw,
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Raw => "raw",
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Samples in [0,1] (raw images) or encoder activations, one label each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Tensor4,
    pub labels: Vec<u8>,
    pub tag: SplitTag,
}

impl Dataset {
    pub fn new(samples: Tensor4, labels: Vec<u8>, tag: SplitTag) -> Result<Self> {
        if samples.batch() != labels.len() {
            return Err(Error::Precondition(format!(
                "{} samples but {} labels",
                samples.batch(),
                labels.len()
            )));
        }
        Ok(Dataset {
            samples,
            labels,
            tag,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> Shape3 {
        self.samples.sample_shape()
    }

    /// Largest label + 1.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    pub fn class_histogram(&self, classes: usize) -> Vec<usize> {
        let mut h = vec![0; classes.max(self.num_classes())];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    pub fn subset(&self, indices: &[usize], tag: SplitTag) -> Dataset {
        Dataset {
            samples: self.samples.gather(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            tag,
        }
    }

    /// Concatenates datasets with equal sample shapes.
    pub fn concat(parts: &[Dataset], tag: SplitTag) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Precondition("nothing to concatenate".into()))?;
        let shape = first.sample_shape();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.sample_shape() != shape {
                return Err(Error::shape(
                    0,
                    format!("sample shape {} vs {}", p.sample_shape(), shape),
                ));
            }
            data.extend_from_slice(p.samples.data());
            labels.extend_from_slice(&p.labels);
        }
        let samples = Tensor4::from_vec([labels.len(), shape.c, shape.h, shape.w], data)?;
        Dataset::new(samples, labels, tag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Stratified 45:5:10 split. The total must be a multiple of 12.
///
/// Each class is shuffled and its members are given evenly spaced keys in
/// (0,1); cutting the key order at 3/4 and 5/6 keeps every class within one
/// sample of its proportional share in every split.
pub fn split(raw: &Dataset, split_seed: u64) -> Result<Splits> {
    let n = raw.len();
    if n == 0 || !n.is_multiple_of(12) {
        return Err(Error::Precondition(format!(
            "cannot split {n} samples 45:5:10 (count must be a positive multiple of 12)"
        )));
    }
    let mut rng = seed::rng(split_seed);
    let classes = raw.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in raw.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut keyed: Vec<(f64, u64, usize)> = Vec::with_capacity(n);
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let m = members.len() as f64;
        for (r, &i) in members.iter().enumerate() {
            keyed.push(((r as f64 + 0.5) / m, rand::Rng::random(&mut rng), i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let order: Vec<usize> = keyed.into_iter().map(|k| k.2).collect();
    let (a, b) = (n * 45 / 60, n * 50 / 60);
    let pick = |range: &[usize], tag, rng: &mut seed::Rng| {
        let mut idx = range.to_vec();
        idx.shuffle(rng);
        raw.subset(&idx, tag)
    };
    Ok(Splits {
        train: pick(&order[..a], SplitTag::Train, &mut rng),
        val: pick(&order[a..b], SplitTag::Val, &mut rng),
        test: pick(&order[b..], SplitTag::Test, &mut rng),
    })
}

/// Shuffled index batches for one epoch; the remainder is dropped.
pub fn batches(n: usize, batch_size: usize, epoch_seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(epoch_seed));
    idx.chunks_exact(batch_size)
        .map(<[usize]>::to_vec)
        .collect()
}

const ENCODE_CHUNK: usize = 256;

/// Runs every sample through `encoder`. Labels and tag are unchanged.
pub fn encode_dataset(encoder: &Network, ds: &Dataset) -> Result<Dataset> {
    if encoder.input_shape() != ds.sample_shape() {
        return Err(Error::shape(
            0,
            format!(
                "encoder expects {} but samples are {}",
                encoder.input_shape(),
                ds.sample_shape()
            ),
        ));
    }
    let out = encoder.output_shape();
    let mut data = Vec::with_capacity(ds.len() * out.len());
    let all: Vec<usize> = (0..ds.len()).collect();
    for chunk in all.chunks(ENCODE_CHUNK) {
        let z = encoder.forward(&ds.samples.gather(chunk))?;
        data.extend_from_slice(z.data());
    }
    let samples = Tensor4::from_vec([ds.len(), out.c, out.h, out.w], data)?;
    Dataset::new(samples, ds.labels.clone(), ds.tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{Genome, GenomeKind, IndividualId};

    fn toy(n: usize, classes: u8) -> Dataset {
        let data: Vec<f64> = (0..n * 4).map(|i| (i % 97) as f64 / 97.0).collect();
        let labels = (0..n).map(|i| (i % classes as usize) as u8).collect();
        Dataset::new(
            Tensor4::from_vec([n, 1, 2, 2], data).unwrap(),
            labels,
            SplitTag::Raw,
        )
        .unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let raw = toy(120, 4);
        let s = split(&raw, 9).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (90, 10, 20));
        assert_eq!(s, split(&raw, 9).unwrap());
        let t = split(&raw, 10).unwrap();
        assert_ne!(s.train.samples, t.train.samples);
        assert_eq!(t.train.len(), 90);
        assert!(split(&toy(100, 4), 1).is_err());
    }

    #[test]
    fn batch_counts() {
        let b = batches(100, 50, 3);
        assert_eq!(b.len(), 2);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(batches(45000, 50, 0).len(), 900);
        assert_eq!(batches(7, 3, 0).len(), 2);
        assert_eq!(batches(100, 50, 3), b);
    }

    #[test]
    fn encoding_keeps_labels_and_count() {
        let raw = toy(12, 3);
        let g = Genome::seed(IndividualId::new("e").unwrap(), GenomeKind::Encoder, 0.01);
        let input = raw.sample_shape();
        let net = g.build_network(input, 0, &mut seed::rng(0)).unwrap();
        let enc = net.prefix(g.trunk_len()).unwrap();
        let z = encode_dataset(&enc, &raw).unwrap();
        assert_eq!(z.len(), raw.len());
        assert_eq!(z.labels, raw.labels);
        assert_eq!(z.sample_shape(), g.infer_shapes(input).unwrap().output());
    }

    #[test]
    fn encoder_shape_mismatch_errors() {
        let raw = toy(12, 3);
        let g = Genome::seed(IndividualId::new("e").unwrap(), GenomeKind::Encoder, 0.01);
        let net = g
            .build_network(Shape3::new(3, 8, 8), 0, &mut seed::rng(0))
            .unwrap();
        assert!(matches!(
            encode_dataset(&net, &raw),
            Err(Error::Shape { .. })
        ));
    }
}
