//! Synthetic stand-in for CIFAR: each class is a linear intensity ramp at
//! its own orientation, with random contrast, offset and pixel noise.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::seed;
use crate::tensor::Tensor4;

use super::{Dataset, SplitTag};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub channels: usize,
    /// Height and width.
    pub size: usize,
    pub classes: usize,
    pub count: usize,
    /// Standard deviation of per-pixel Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            channels: 3,
            size: 16,
            classes: 4,
            count: 1200,
            noise: 0.1,
            seed: 0,
        }
    }
}

/// Labels cycle through the classes, so the histogram is uniform whenever
/// `count` is a multiple of `classes`.
pub fn synth_dataset(cfg: &SynthConfig) -> Dataset {
    assert!(
        cfg.classes >= 1 && cfg.classes <= 256,
        "classes must be in 1..=256"
    );
    let mut rng = seed::rng(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("finite noise");
    let (c, s) = (cfg.channels, cfg.size);
    let mut data = Vec::with_capacity(cfg.count * c * s * s);
    let mut labels = Vec::with_capacity(cfg.count);
    let centre = (s as f64 - 1.0) / 2.0;
    let scale = centre.max(1.0);
    for i in 0..cfg.count {
        let label = i % cfg.classes;
        let angle = TAU * label as f64 / cfg.classes as f64;
        let (dy, dx) = angle.sin_cos();
        let contrast: f64 = rng.random_range(0.5..1.0);
        for _ in 0..c {
            let offset: f64 = rng.random_range(0.35..0.65);
            for y in 0..s {
                for x in 0..s {
                    let u = (x as f64 - centre) / scale;
                    let v = (y as f64 - centre) / scale;
                    let ramp = (dx * u + dy * v) / std::f64::consts::SQRT_2;
                    let val = offset + 0.5 * contrast * ramp + noise.sample(&mut rng);
                    data.push(val.clamp(0.0, 1.0));
                }
            }
        }
        labels.push(label as u8);
    }
    let samples = Tensor4::from_vec([cfg.count, c, s, s], data).expect("consistent dims");
    Dataset::new(samples, labels, SplitTag::Raw).expect("one label per sample")
}
