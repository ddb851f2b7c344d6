use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use caevo_core::mcdm::{format_ranked_csv, parse_front_csv, topsis_rank, TopsisWeights};
use caevo_core::pipeline::{self, RunConfig, Stage, TimeMode};
use caevo_core::popstore::Store;

#[derive(Parser)]
#[command(
    name = "caevo",
    version,
    about = "Evolve autoencoders, then classifiers on the encoded data"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Publish seed individuals without running any rounds.
    Seed {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "cae", value_parser = parse_stage)]
        stage: Stage,
    },
    /// Evolve the autoencoder population.
    EvolveCae {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rank autoencoders by TOPSIS, from a CSV front or the live population.
    SelectCae {
        /// `<compression>,<accuracy>` weights.
        #[arg(long, value_parser = parse_weights)]
        weights: Option<TopsisWeights>,
        /// CSV of `id,compression,accuracy[,generation]`.
        #[arg(long, conflicts_with = "config")]
        front: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Choose the encoder and write the encoded dataset cache.
    Encode {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evolve the classifier population.
    EvolveClf {
        #[arg(long)]
        config: PathBuf,
    },
    /// Prepend the chosen encoder to the best classifier and test it.
    Compose {
        #[arg(long)]
        config: PathBuf,
    },
    /// Export the history and summary of a population.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "clf", value_parser = parse_stage)]
        stage: Stage,
        /// Use publish sequence numbers instead of wall-clock offsets.
        #[arg(long)]
        logical: bool,
        /// Write the history CSV here instead of the report directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured step(s) end to end.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_stage)]
        stage: Stage,
        #[arg(long)]
        worker_id: u32,
        #[arg(long)]
        skip_seeding: bool,
    },
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse().map_err(|e: caevo_core::Error| e.to_string())
}

fn parse_weights(s: &str) -> Result<TopsisWeights, String> {
    let (c, a) = s
        .split_once(',')
        .ok_or("expected <compression>,<accuracy>")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    TopsisWeights::new(num(c)?, num(a)?).map_err(|e| e.to_string())
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn exe() -> Result<PathBuf> {
    std::env::current_exe().context("locating the caevo executable")
}

fn evolve(config: &Path, stage: Stage) -> Result<()> {
    let cfg = load(config)?;
    let summary = pipeline::run_step(&cfg, stage, &exe()?, config)?;
    pipeline::write_stage_report(&cfg, stage, TimeMode::Wall)?;
    print!("{summary}");
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Cmd::Seed { config, stage } => {
            let mut cfg = load(&config)?;
            cfg.round_budget = Some(0);
            cfg.wall_budget_secs = None;
            for w in 0..cfg.workers as u32 {
                let s = pipeline::worker_main(&cfg, stage, w, false)?;
                info!("worker {w} published {} seeds", s.seeded);
            }
        }
        Cmd::EvolveCae { config } => evolve(&config, Stage::Cae)?,
        Cmd::EvolveClf { config } => evolve(&config, Stage::Classify)?,
        Cmd::SelectCae {
            weights,
            front,
            config,
        } => {
            let ranked = match (front, config) {
                (Some(front), None) => {
                    let text =
                        fs::read_to_string(&front).with_context(|| front.display().to_string())?;
                    topsis_rank(&parse_front_csv(&text)?, &weights.unwrap_or_default())?
                }
                (None, Some(config)) => {
                    let mut cfg = load(&config)?;
                    if let Some(w) = weights {
                        (cfg.topsis_compression, cfg.topsis_accuracy) =
                            (w.compression(), w.accuracy());
                    }
                    pipeline::rank_cae_front(&cfg)?
                }
                _ => bail!("pass either --front or --config"),
            };
            print!("{}", format_ranked_csv(&ranked));
        }
        Cmd::Encode { config } => {
            let fin = pipeline::finalize_cae_step(&load(&config)?)?;
            println!("{}", fin.chosen.id);
            println!("{}", fin.encoded_dir.display());
        }
        Cmd::Compose { config } => {
            let c = pipeline::compose_final(&load(&config)?)?;
            println!(
                "encoder {} classifier {} test_accuracy {:.4}",
                c.encoder_id.as_ref().map_or("-", |i| i.as_str()),
                c.classifier_id,
                c.test_accuracy
            );
        }
        Cmd::Report {
            config,
            stage,
            logical,
            out,
        } => {
            let cfg = load(&config)?;
            let mode = if logical {
                TimeMode::Logical
            } else {
                TimeMode::Wall
            };
            match out {
                Some(path) => {
                    let store = Store::open(stage.population(&cfg))?;
                    fs::write(&path, pipeline::export_history(&store, mode)?)
                        .with_context(|| path.display().to_string())?;
                }
                None => print!("{}", pipeline::write_stage_report(&cfg, stage, mode)?),
            }
        }
        Cmd::Run { config } => {
            let cfg = load(&config)?;
            if let Some(c) = pipeline::run_pipeline(&cfg, &exe()?, &config)? {
                println!("test_accuracy {:.4}", c.test_accuracy);
            }
        }
        Cmd::Worker {
            config,
            stage,
            worker_id,
            skip_seeding,
        } => {
            pipeline::worker_main(&load(&config)?, stage, worker_id, skip_seeding)?;
        }
    }
    Ok(())
}
