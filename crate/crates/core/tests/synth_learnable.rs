use caevo_core::data::{synth_dataset, SynthConfig};
use caevo_core::genome::{Genome, GenomeKind, IndividualId, LayerGene};
use caevo_core::nn::{train_individual, TrainConfig};

#[test]
fn two_layer_cnn_separates_two_classes() {
    let cfg = SynthConfig {
        size: 16,
        classes: 2,
        count: 512,
        ..SynthConfig::default()
    };
    let train = synth_dataset(&cfg);
    let val = synth_dataset(&SynthConfig {
        count: 128,
        seed: 99,
        ..cfg
    });
    let g = Genome {
        id: IndividualId::new("ref").unwrap(),
        kind: GenomeKind::Classifier,
        layers: vec![
            LayerGene::Conv {
                filters: 8,
                kh: 3,
                kw: 3,
                stride: 1,
            },
            LayerGene::Conv {
                filters: 8,
                kh: 3,
                kw: 3,
                stride: 2,
            },
        ],
        learning_rate: 0.01,
        parent_id: None,
        generation: 0,
        mutation: None,
    };
    let tc = TrainConfig {
        epochs: 3,
        batch_size: 16,
        learning_rate: 0.01,
        momentum: 0.9,
        seed: 1,
        deadline: None,
    };
    let (_, report) = train_individual(&g, &train, &val, 2, &tc).unwrap();
    assert!(report.metric > 0.9, "validation accuracy {}", report.metric);
}
