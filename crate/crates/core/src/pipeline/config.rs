//! Run configuration: a flat TOML file plus path-only environment overrides.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::error::{Error, IoContext, Result};
use crate::mcdm::TopsisWeights;
use crate::mutation::MutationParams;
use crate::selection::IsolationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Cae,
    Classify,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Synth,
    Cifar10,
}

/// Input of the classifier step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifyOn {
    Encoded,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub step: StepKind,
    pub dataset_kind: DatasetKind,
    /// Directory of CIFAR-10 binary batches.
    pub dataset_path: PathBuf,
    pub synth_size: usize,
    pub synth_channels: usize,
    pub synth_classes: usize,
    pub synth_count: usize,
    pub synth_noise: f64,
    pub split_seed: u64,
    pub cae_population: PathBuf,
    pub clf_population: PathBuf,
    pub report_dir: PathBuf,
    pub classify_on: ClassifyOn,
    /// Directory holding `train.evod`, `val.evod`, `test.evod`; defaults to
    /// the cache of the chosen encoder.
    pub encoded_dataset: Option<PathBuf>,
    pub workers: usize,
    pub seeds_per_worker: usize,
    pub epochs: usize,
    /// Overrides `epochs` for the autoencoder step.
    pub cae_epochs: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub topsis_compression: f64,
    pub topsis_accuracy: f64,
    pub master_seed: u64,
    /// Rounds per step shared by all workers.
    pub round_budget: Option<u64>,
    /// Wall-clock seconds per worker per step.
    pub wall_budget_secs: Option<f64>,
    pub max_mutation_tries: usize,
    pub isolation: String,
    pub insert_conv_filters: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            step: StepKind::Full,
            dataset_kind: DatasetKind::Synth,
            dataset_path: PathBuf::from("cifar-10-batches-bin"),
            synth_size: 16,
            synth_channels: 3,
            synth_classes: 4,
            synth_count: 1200,
            synth_noise: 0.1,
            split_seed: 1,
            cae_population: PathBuf::from("runs/cae"),
            clf_population: PathBuf::from("runs/clf"),
            report_dir: PathBuf::from("runs/report"),
            classify_on: ClassifyOn::Encoded,
            encoded_dataset: None,
            workers: 2,
            seeds_per_worker: 2,
            epochs: 3,
            cae_epochs: None,
            batch_size: 50,
            learning_rate: 0.01,
            momentum: 0.9,
            topsis_compression: 0.5,
            topsis_accuracy: 0.5,
            master_seed: 0,
            round_budget: None,
            wall_budget_secs: Some(600.0),
            max_mutation_tries: 25,
            isolation: "mean".into(),
            insert_conv_filters: vec![8, 16, 32, 64],
        }
    }
}

/// Environment variables that may replace configured paths.
pub const PATH_OVERRIDES: [&str; 5] = [
    "CAEVO_DATASET_PATH",
    "CAEVO_CAE_POPULATION",
    "CAEVO_CLF_POPULATION",
    "CAEVO_REPORT_DIR",
    "CAEVO_ENCODED_DATASET",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, applies environment overrides, resolves relative paths
    /// against the file's directory and validates.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).at(path)?;
        let mut cfg = RunConfig::parse(&text)?;
        cfg.apply_env(|k| std::env::var_os(k).map(PathBuf::from));
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<PathBuf>) {
        let [data, cae, clf, report, encoded] = PATH_OVERRIDES;
        if let Some(p) = get(data) {
            self.dataset_path = p;
        }
        if let Some(p) = get(cae) {
            self.cae_population = p;
        }
        if let Some(p) = get(clf) {
            self.clf_population = p;
        }
        if let Some(p) = get(report) {
            self.report_dir = p;
        }
        if let Some(p) = get(encoded) {
            self.encoded_dataset = Some(p);
        }
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.dataset_path,
            &mut self.cae_population,
            &mut self.clf_population,
            &mut self.report_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = &mut self.encoded_dataset {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.seeds_per_worker == 0 || self.workers * self.seeds_per_worker < 2 {
            return bad("the population needs at least two seeds in total");
        }
        if self.epochs == 0 || self.cae_epochs == Some(0) {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        match (self.round_budget, self.wall_budget_secs) {
            (None, None) => return bad("set round_budget or wall_budget_secs"),
            (_, Some(s)) if !(s.is_finite() && s > 0.0) => {
                return bad("wall_budget_secs must be positive")
            }
            _ => {}
        }
        if self.max_mutation_tries == 0 {
            return bad("max_mutation_tries must be at least 1");
        }
        if self.insert_conv_filters.is_empty() || self.insert_conv_filters.contains(&0) {
            return bad("insert_conv_filters must be non-empty and positive");
        }
        if self.dataset_kind == DatasetKind::Synth {
            if self.synth_size == 0 || self.synth_channels == 0 {
                return bad("synthetic images need positive size and channels");
            }
            if !(2..=10).contains(&self.synth_classes) {
                return bad("synth_classes must be in 2..=10");
            }
            if self.synth_count == 0 || !self.synth_count.is_multiple_of(12) {
                return bad("synth_count must be a positive multiple of 12 for the 45:5:10 split");
            }
        }
        self.isolation_mode()?;
        self.topsis_weights()?;
        Ok(())
    }

    pub fn isolation_mode(&self) -> Result<IsolationMode> {
        self.isolation.parse()
    }

    pub fn topsis_weights(&self) -> Result<TopsisWeights> {
        TopsisWeights::new(self.topsis_compression, self.topsis_accuracy)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn mutation_params(&self) -> MutationParams {
        MutationParams {
            insert_conv_filters: self.insert_conv_filters.clone(),
        }
    }

    pub fn wall_budget(&self) -> Option<Duration> {
        self.wall_budget_secs.map(Duration::from_secs_f64)
    }
}
