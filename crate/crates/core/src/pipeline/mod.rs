//! End-to-end orchestration: evolve autoencoders, pick and apply an
//! encoder, evolve classifiers on the encoded data, compose the result.

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;

use log::{info, warn};

use crate::data::{
    encode_dataset, load_cifar10, read_evod, split, synth_dataset, write_evod, Dataset, SplitTag,
    Splits, SynthConfig,
};
use crate::error::{Error, IoContext, Result};
use crate::genome::{GenomeKind, IndividualId};
use crate::mcdm::{format_ranked_csv, topsis_rank, Alternative, Ranked};
use crate::nn::io::encode_weights;
use crate::nn::train::{evaluate, Objective};
use crate::nn::Network;
use crate::popstore::{
    run_worker, Area, Store, WorkerConfig, WorkerSummary, GENOME_FILE, WEIGHTS_FILE,
};
use crate::seed;
use crate::selection::pareto_fronts;

pub use config::{ClassifyOn, DatasetKind, RunConfig, StepKind, PATH_OVERRIDES};
pub use report::{
    export_history, history_rows, summarize, HistoryRow, StepSummary, TimeMode, HISTORY_HEADER,
};

/// One evolutionary step and its population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Cae,
    Classify,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Cae => "cae",
            Stage::Classify => "clf",
        }
    }

    pub fn kind(self) -> GenomeKind {
        match self {
            Stage::Cae => GenomeKind::Encoder,
            Stage::Classify => GenomeKind::Classifier,
        }
    }

    fn salt(self) -> u64 {
        match self {
            Stage::Cae => 1,
            Stage::Classify => 2,
        }
    }

    pub fn population(self, cfg: &RunConfig) -> &Path {
        match self {
            Stage::Cae => &cfg.cae_population,
            Stage::Classify => &cfg.clf_population,
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cae" => Ok(Stage::Cae),
            "clf" => Ok(Stage::Classify),
            _ => Err(Error::Config(format!(
                "stage must be cae or clf, got {s:?}"
            ))),
        }
    }
}

/// The raw dataset split 45:5:10. Deterministic in the config.
pub fn load_raw_splits(cfg: &RunConfig) -> Result<Splits> {
    let raw = match cfg.dataset_kind {
        DatasetKind::Synth => synth_dataset(&SynthConfig {
            channels: cfg.synth_channels,
            size: cfg.synth_size,
            classes: cfg.synth_classes,
            count: cfg.synth_count,
            noise: cfg.synth_noise,
            seed: seed::derive(cfg.split_seed, 0xda7a),
        }),
        DatasetKind::Cifar10 => load_cifar10(&cfg.dataset_path)?,
    };
    split(&raw, cfg.split_seed)
}

pub fn read_encoded_splits(dir: &Path) -> Result<Splits> {
    Ok(Splits {
        train: read_evod(&dir.join("train.evod"), SplitTag::Train)?,
        val: read_evod(&dir.join("val.evod"), SplitTag::Val)?,
        test: read_evod(&dir.join("test.evod"), SplitTag::Test)?,
    })
}

fn chosen_file(cfg: &RunConfig) -> PathBuf {
    cfg.cae_population.join("chosen.txt")
}

/// Directory of the encoded dataset used by the classifier step.
pub fn encoded_dir(cfg: &RunConfig) -> Result<PathBuf> {
    if let Some(d) = &cfg.encoded_dataset {
        return Ok(d.clone());
    }
    let p = chosen_file(cfg);
    let id = fs::read_to_string(&p).map_err(|_| Error::Missing {
        what: "chosen encoder (run select/encode first)",
        id: p.display().to_string(),
    })?;
    Ok(cfg.cae_population.join("encoded").join(id.trim()))
}

/// Training data for a stage.
pub fn stage_data(cfg: &RunConfig, stage: Stage) -> Result<Splits> {
    match (stage, cfg.classify_on) {
        (Stage::Classify, ClassifyOn::Encoded) => read_encoded_splits(&encoded_dir(cfg)?),
        _ => load_raw_splits(cfg),
    }
}

fn class_count(s: &Splits) -> usize {
    s.train
        .num_classes()
        .max(s.val.num_classes())
        .max(s.test.num_classes())
}

pub fn worker_config(
    cfg: &RunConfig,
    stage: Stage,
    worker_id: u32,
    classes: usize,
    skip_seeding: bool,
) -> Result<WorkerConfig> {
    Ok(WorkerConfig {
        worker_id,
        kind: stage.kind(),
        classes,
        seeds: cfg.seeds_per_worker,
        skip_seeding,
        learning_rate: cfg.learning_rate,
        epochs: match stage {
            Stage::Cae => cfg.cae_epochs.unwrap_or(cfg.epochs),
            Stage::Classify => cfg.epochs,
        },
        batch_size: cfg.batch_size,
        momentum: cfg.momentum,
        mutation: cfg.mutation_params(),
        max_tries: cfg.max_mutation_tries,
        isolation: cfg.isolation_mode()?,
        round_budget: cfg.round_budget,
        wall_budget: cfg.wall_budget(),
        seed: seed::worker_seed(cfg.master_seed, stage.salt(), worker_id),
    })
}

/// Body of a worker process.
pub fn worker_main(
    cfg: &RunConfig,
    stage: Stage,
    worker_id: u32,
    skip_seeding: bool,
) -> Result<WorkerSummary> {
    let data = stage_data(cfg, stage)?;
    let store = Store::open(stage.population(cfg))?;
    let wc = worker_config(cfg, stage, worker_id, class_count(&data), skip_seeding)?;
    run_worker(&store, wc, &data.train, &data.val)
}

/// Runs `cfg.workers` worker processes of `exe` against the stage's
/// population and waits for all of them. Workers skip seeding when the
/// population already has live members.
pub fn run_step(
    cfg: &RunConfig,
    stage: Stage,
    exe: &Path,
    config_path: &Path,
) -> Result<StepSummary> {
    let store = Store::open(stage.population(cfg))?;
    if stage == Stage::Classify && cfg.classify_on == ClassifyOn::Encoded {
        let dir = encoded_dir(cfg)?;
        if !dir.join("train.evod").exists() {
            return Err(Error::Missing {
                what: "encoded dataset",
                id: dir.display().to_string(),
            });
        }
    }
    let skip = store.live_count()? > 0;
    let config_path = fs::canonicalize(config_path).at(config_path)?;
    let mut children = Vec::new();
    for w in 0..cfg.workers {
        let mut cmd = Command::new(exe);
        cmd.arg("worker")
            .arg("--config")
            .arg(&config_path)
            .arg("--stage")
            .arg(stage.as_str())
            .arg("--worker-id")
            .arg(w.to_string());
        if skip {
            cmd.arg("--skip-seeding");
        }
        children.push((w, cmd.spawn().at(exe)?));
    }
    let mut ok = 0;
    for (w, mut child) in children {
        let status = child.wait().at(exe)?;
        if status.success() {
            ok += 1;
        } else {
            warn!("worker {w} exited with {status}");
        }
    }
    if ok == 0 {
        return Err(Error::Precondition(format!(
            "all {} {} workers failed",
            cfg.workers,
            stage.as_str()
        )));
    }
    let summary = summarize(&store)?;
    info!(
        "{} step: {} networks, best {}",
        stage.as_str(),
        summary.networks_generated,
        summary.best_metric
    );
    Ok(summary)
}

/// Writes `<stage>_history.csv` and `<stage>_summary.csv` to the report dir.
pub fn write_stage_report(cfg: &RunConfig, stage: Stage, mode: TimeMode) -> Result<StepSummary> {
    let store = Store::open(stage.population(cfg))?;
    fs::create_dir_all(&cfg.report_dir).at(&cfg.report_dir)?;
    let hist = cfg
        .report_dir
        .join(format!("{}_history.csv", stage.as_str()));
    fs::write(&hist, export_history(&store, mode)?).at(&hist)?;
    let summary = summarize(&store)?;
    let p = cfg
        .report_dir
        .join(format!("{}_summary.csv", stage.as_str()));
    fs::write(&p, summary.to_string()).at(&p)?;
    Ok(summary)
}

/// Live autoencoders on the first Pareto front, ranked by TOPSIS.
pub fn rank_cae_front(cfg: &RunConfig) -> Result<Vec<Ranked>> {
    let store = Store::open(&cfg.cae_population)?;
    let snap = store.snapshot()?;
    let pairs: Vec<_> = snap.iter().filter_map(|s| s.fitness.pair()).collect();
    if pairs.is_empty() || pairs.len() != snap.len() {
        return Err(Error::Precondition(format!(
            "{} holds no autoencoder population",
            cfg.cae_population.display()
        )));
    }
    let alts = pareto_fronts(&pairs)[0]
        .iter()
        .map(|&i| {
            Alternative::new(
                snap[i].id.as_str(),
                snap[i].generation,
                pairs[i].compression,
                pairs[i].accuracy,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    topsis_rank(&alts, &cfg.topsis_weights()?)
}

#[derive(Debug, Clone)]
pub struct Finalized {
    pub ranked: Vec<Ranked>,
    pub chosen: Alternative,
    pub encoded_dir: PathBuf,
}

/// Picks the encoder by TOPSIS over front 0 and writes the encoded
/// train/val/test cache next to a copy of its genome and weights.
pub fn finalize_cae_step(cfg: &RunConfig) -> Result<Finalized> {
    let ranked = rank_cae_front(cfg)?;
    let chosen = ranked[0].alternative.clone();
    fs::create_dir_all(&cfg.report_dir).at(&cfg.report_dir)?;
    let front = cfg.report_dir.join("cae_front.csv");
    fs::write(&front, format_ranked_csv(&ranked)).at(&front)?;

    let store = Store::open(&cfg.cae_population)?;
    let id = IndividualId::new(chosen.id.clone())?;
    let dir = cfg.cae_population.join("encoded").join(id.as_str());
    let done = ["train", "val", "test"]
        .iter()
        .all(|s| dir.join(format!("{s}.evod")).exists());
    if !done {
        let raw = load_raw_splits(cfg)?;
        let genome = store.load_genome(Area::Live, &id)?;
        let net = store.load_weights(Area::Live, &id, raw.train.sample_shape())?;
        let encoder = net.prefix(genome.trunk_len())?;
        fs::create_dir_all(&dir).at(&dir)?;
        for (name, ds) in [
            ("train", &raw.train),
            ("val", &raw.val),
            ("test", &raw.test),
        ] {
            write_evod(
                &dir.join(format!("{name}.evod")),
                &encode_dataset(&encoder, ds)?,
            )?;
        }
        let g = dir.join(GENOME_FILE);
        fs::write(&g, genome.to_text()).at(&g)?;
        let w = dir.join(WEIGHTS_FILE);
        fs::write(&w, encode_weights(&net)).at(&w)?;
    }
    let c = chosen_file(cfg);
    fs::write(&c, format!("{id}\n")).at(&c)?;
    info!(
        "chose encoder {id} (compression {}, accuracy {})",
        chosen.compression, chosen.accuracy
    );
    Ok(Finalized {
        ranked,
        chosen,
        encoded_dir: dir,
    })
}

#[derive(Debug, Clone)]
pub struct Composed {
    pub network: Network,
    pub encoder_id: Option<IndividualId>,
    pub classifier_id: IndividualId,
    /// Accuracy of the composed network on the raw test split.
    pub test_accuracy: f64,
    /// Accuracy of the classifier alone on the encoded test split.
    pub encoded_test_accuracy: Option<f64>,
}

/// Loads the encoding half of a cached encoder.
pub fn load_encoder(dir: &Path, input: crate::tensor::Shape3) -> Result<(IndividualId, Network)> {
    let gp = dir.join(GENOME_FILE);
    let text = fs::read_to_string(&gp).map_err(|_| Error::Missing {
        what: "encoder genome",
        id: dir.display().to_string(),
    })?;
    let genome = crate::genome::Genome::from_text(&text)?;
    let wp = dir.join(WEIGHTS_FILE);
    let bytes = fs::read(&wp).map_err(|_| Error::Missing {
        what: "encoder weights",
        id: genome.id.to_string(),
    })?;
    let net = crate::nn::io::decode_weights(&bytes, input)?;
    Ok((genome.id.clone(), net.prefix(genome.trunk_len())?))
}

/// Best live classifier (highest validation accuracy, then lowest
/// generation, then id).
pub fn best_classifier(store: &Store) -> Result<crate::popstore::Sidecar> {
    store
        .snapshot()?
        .into_iter()
        .filter(|s| s.fitness.scalar().is_some())
        .min_by(|a, b| {
            let (x, y) = (a.fitness.scalar().unwrap(), b.fitness.scalar().unwrap());
            y.total_cmp(&x)
                .then(a.generation.cmp(&b.generation))
                .then(a.id.cmp(&b.id))
        })
        .ok_or_else(|| Error::Precondition("no live classifier to compose".into()))
}

/// Prepends the chosen encoder to the best classifier and evaluates the
/// result once on the raw test split.
pub fn compose_final(cfg: &RunConfig) -> Result<Composed> {
    let raw = load_raw_splits(cfg)?;
    let classes = class_count(&raw);
    let store = Store::open(&cfg.clf_population)?;
    let best = best_classifier(&store)?;
    let (encoder, encoded_test) = match cfg.classify_on {
        ClassifyOn::Encoded => {
            let dir = encoded_dir(cfg)?;
            let (id, enc) = load_encoder(&dir, raw.train.sample_shape())?;
            (
                Some((id, enc)),
                Some(read_evod(&dir.join("test.evod"), SplitTag::Test)?),
            )
        }
        ClassifyOn::Raw => (None, None),
    };
    let clf_input = encoder
        .as_ref()
        .map_or(raw.train.sample_shape(), |(_, e)| e.output_shape());
    let clf = store.load_weights(Area::Live, &best.id, clf_input)?;
    let objective = Objective::Classify { classes };
    let encoded_test_accuracy = match &encoded_test {
        Some(ds) => Some(evaluate(&clf, objective, ds)?),
        None => None,
    };
    let (encoder_id, network) = match encoder {
        Some((id, enc)) => (Some(id), enc.then(&clf)?),
        None => (None, clf),
    };
    let test_accuracy = evaluate(&network, objective, &raw.test)?;
    fs::create_dir_all(&cfg.report_dir).at(&cfg.report_dir)?;
    let w = cfg.report_dir.join("final.evow");
    fs::write(&w, encode_weights(&network)).at(&w)?;
    let f = cfg.report_dir.join("final.csv");
    let text = format!(
        "encoder_id,{}\nclassifier_id,{}\nvalidation_accuracy,{}\ntest_accuracy,{}\nencoded_test_accuracy,{}\n",
        encoder_id.as_ref().map_or("-", |i| i.as_str()),
        best.id,
        best.fitness.scalar().unwrap_or(f64::NAN),
        test_accuracy,
        encoded_test_accuracy.map_or("-".to_string(), |a| a.to_string()),
    );
    fs::write(&f, text).at(&f)?;
    Ok(Composed {
        network,
        encoder_id,
        classifier_id: best.id,
        test_accuracy,
        encoded_test_accuracy,
    })
}

/// Runs the configured step(s) end to end with worker processes of `exe`.
pub fn run_pipeline(cfg: &RunConfig, exe: &Path, config_path: &Path) -> Result<Option<Composed>> {
    if matches!(cfg.step, StepKind::Cae | StepKind::Full) {
        run_step(cfg, Stage::Cae, exe, config_path)?;
        write_stage_report(cfg, Stage::Cae, TimeMode::Wall)?;
    }
    if cfg.step == StepKind::Cae {
        return Ok(None);
    }
    if cfg.step == StepKind::Full && cfg.classify_on == ClassifyOn::Encoded {
        finalize_cae_step(cfg)?;
    }
    run_step(cfg, Stage::Classify, exe, config_path)?;
    write_stage_report(cfg, Stage::Classify, TimeMode::Wall)?;
    compose_final(cfg).map(Some)
}

/// Loads a dataset file for inspection: EVOD by extension, otherwise a
/// CIFAR batch.
pub fn load_dataset_file(path: &Path) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e == "evod") {
        read_evod(path, SplitTag::Raw)
    } else {
        crate::data::parse_cifar_batch(&fs::read(path).at(path)?)
    }
}
