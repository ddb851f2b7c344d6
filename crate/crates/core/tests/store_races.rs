use std::collections::{BTreeMap, HashSet};
use std::sync::Barrier;
use std::thread;

use caevo_core::data::{split, synth_dataset, SynthConfig};
use caevo_core::genome::{Genome, GenomeKind, IndividualId};
use caevo_core::mutation::{sample_mutation, MutationKind, MutationParams};
use caevo_core::popstore::{run_worker, Area, Sidecar, Store, WorkerConfig};
use caevo_core::seed;
use caevo_core::selection::{FitnessRecord, IsolationMode};
use caevo_core::tensor::Shape3;

fn id(s: &str) -> IndividualId {
    IndividualId::new(s).unwrap()
}

fn publish(store: &Store, name: &str) {
    let g = Genome::seed(id(name), GenomeKind::Classifier, 0.01);
    let net = g
        .build_network(Shape3::new(1, 4, 4), 2, &mut seed::rng(0))
        .unwrap();
    let sc = Sidecar {
        id: id(name),
        kind: GenomeKind::Classifier,
        fitness: FitnessRecord::Scalar(0.5),
        wall_seconds: 0.0,
        worker_id: 0,
        generation: 0,
        parent_id: None,
        mutation: None,
    };
    let claim = store.claim(&id(name)).unwrap().unwrap();
    store.publish(claim, &g, &net, &sc).unwrap();
}

/// Within 5 standard deviations of a binomial expectation.
fn within_5_sigma(count: usize, n: usize, p: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 5.0 * sd
}

#[test]
fn racing_kills_have_one_winner() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    for round in 0..25 {
        let name = format!("victim{round}");
        publish(&store, &name);
        let barrier = Barrier::new(4);
        let wins: usize = thread::scope(|s| {
            let hs: Vec<_> = (0..4)
                .map(|_| {
                    s.spawn(|| {
                        barrier.wait();
                        store.kill(&id(&name)).unwrap() as usize
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).sum()
        });
        assert_eq!(wins, 1);
    }
}

#[test]
fn concurrent_publishes_all_land_intact() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    thread::scope(|s| {
        for t in 0..4 {
            let store = &store;
            s.spawn(move || {
                for i in 0..10 {
                    publish(store, &format!("t{t}-{i}"));
                }
            });
        }
    });
    let live = store.list(Area::Live).unwrap();
    assert_eq!(live.len(), 40);
    for i in &live {
        let g = store.load_genome(Area::Live, i).unwrap();
        assert_eq!(&g.id, i);
        store
            .load_weights(Area::Live, i, Shape3::new(1, 4, 4))
            .unwrap();
        assert_eq!(&store.load_sidecar(Area::Live, i).unwrap().unwrap().id, i);
    }
}

#[test]
fn pair_sampling_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    for i in 0..10 {
        publish(&store, &format!("p{i}"));
    }
    let mut rng = seed::rng(42);
    let n = 10_000;
    let mut counts: BTreeMap<(IndividualId, IndividualId), usize> = BTreeMap::new();
    for _ in 0..n {
        let (a, b) = store.sample_pair(&mut rng).unwrap().unwrap();
        assert_ne!(a, b);
        *counts
            .entry(if a < b { (a, b) } else { (b, a) })
            .or_default() += 1;
    }
    assert_eq!(counts.len(), 45);
    for (pair, c) in counts {
        assert!(within_5_sigma(c, n, 1.0 / 45.0), "{pair:?}: {c}");
    }
}

#[test]
fn mutation_sampling_is_uniform() {
    let kinds = MutationKind::catalog(GenomeKind::Encoder);
    let mut rng = seed::rng(7);
    let n = 10_000;
    let mut counts = BTreeMap::new();
    for _ in 0..n {
        *counts
            .entry(sample_mutation(kinds, &mut rng))
            .or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 9);
    for (k, c) in counts {
        assert!(within_5_sigma(c, n, 1.0 / 9.0), "{k}: {c}");
    }
}

#[test]
fn sampling_tolerates_concurrent_kills() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    for i in 0..60 {
        publish(&store, &format!("k{i:02}"));
    }
    thread::scope(|s| {
        s.spawn(|| {
            for i in 0..58 {
                store.kill(&id(&format!("k{i:02}"))).unwrap();
            }
        });
        s.spawn(|| {
            let mut rng = seed::rng(1);
            while let Some((a, b)) = store.sample_pair(&mut rng).unwrap() {
                // vanished entries read as None, never as an error
                let _ = store.load_sidecar(Area::Live, &a).unwrap();
                let _ = store.load_sidecar(Area::Live, &b).unwrap();
                if store.live_count().unwrap() <= 2 {
                    break;
                }
            }
        });
    });
    assert_eq!(store.live_count().unwrap(), 2);
}

#[test]
fn threaded_workers_conserve_and_never_share_children() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let raw = synth_dataset(&SynthConfig {
        channels: 1,
        size: 6,
        classes: 2,
        count: 48,
        noise: 0.05,
        seed: 3,
    });
    let sp = split(&raw, 1).unwrap();
    let workers = 3;
    let budget = 30;
    thread::scope(|s| {
        for w in 0..workers {
            let (store, sp) = (&store, &sp);
            s.spawn(move || {
                let cfg = WorkerConfig {
                    worker_id: w,
                    kind: GenomeKind::Classifier,
                    classes: 2,
                    seeds: 2,
                    skip_seeding: false,
                    learning_rate: 0.01,
                    epochs: 1,
                    batch_size: 8,
                    momentum: 0.9,
                    mutation: MutationParams::default(),
                    max_tries: 25,
                    isolation: IsolationMode::Mean,
                    round_budget: Some(budget),
                    wall_budget: None,
                    seed: seed::worker_seed(9, 2, w),
                };
                run_worker(store, cfg, &sp.train, &sp.val).unwrap()
            });
        }
    });
    let live = store.list(Area::Live).unwrap().len();
    let dead = store.list(Area::Dead).unwrap().len();
    let publishes = store.read_logs("publish-").unwrap().len();
    assert_eq!(live + dead, publishes);
    assert_eq!(store.tickets_taken().unwrap(), budget);
    let claims: Vec<String> = store
        .read_logs("claims-")
        .unwrap()
        .into_iter()
        .filter(|l| l.starts_with("claim,"))
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    let unique: HashSet<_> = claims.iter().collect();
    assert_eq!(unique.len(), claims.len());
    assert!(store.list(Area::Claimed).unwrap().is_empty());
}
