use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use caevo_core::data::{synth_dataset, SynthConfig};
use caevo_core::genome::{Genome, GenomeKind, IndividualId};
use caevo_core::nn::{train_network, Objective, Tape, TrainConfig};
use caevo_core::seed;

fn seed_cae(input: caevo_core::Shape3) -> Genome {
    Genome::seed_for(
        IndividualId::new("bench").unwrap(),
        GenomeKind::Encoder,
        0.01,
        input,
    )
    .unwrap()
}

fn bench_cae_passes(c: &mut Criterion) {
    let ds = synth_dataset(&SynthConfig {
        size: 32,
        count: 64,
        ..SynthConfig::default()
    });
    let input = ds.sample_shape();
    let net = seed_cae(input)
        .build_network(input, 0, &mut seed::rng(1))
        .unwrap();
    let idx: Vec<usize> = (0..32).collect();
    let x = ds.samples.gather(&idx);

    let mut group = c.benchmark_group("cae_3x32x32_batch32");
    group.bench_function("forward", |b| b.iter(|| net.forward(&x).unwrap()));
    group.bench_function("forward_backward", |b| {
        let mut tape = Tape::new();
        b.iter(|| {
            let out = net.forward_tape(&x, &mut tape).unwrap();
            net.backward(&tape, &out).unwrap()
        })
    });
    group.finish();
}

fn bench_train_epoch(c: &mut Criterion) {
    let ds = synth_dataset(&SynthConfig {
        size: 16,
        count: 240,
        ..SynthConfig::default()
    });
    let input = ds.sample_shape();
    let g = Genome::seed_for(
        IndividualId::new("bench").unwrap(),
        GenomeKind::Classifier,
        0.01,
        input,
    )
    .unwrap();
    let net = g.build_network(input, 4, &mut seed::rng(2)).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 20,
        learning_rate: 0.01,
        momentum: 0.9,
        seed: 3,
        deadline: None,
    };

    c.bench_function("classifier_epoch_240x3x16x16", |b| {
        b.iter_batched(
            || net.clone(),
            |mut n| {
                train_network(&mut n, Objective::Classify { classes: 4 }, &ds, &ds, &cfg).unwrap()
            },
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, bench_cae_passes, bench_train_epoch);
criterion_main!(benches);
