//! The worker loop: sample, compare, kill, mutate, train, publish.

use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use log::{debug, info, warn};
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::genome::{inherit_weights, Genome, GenomeKind, IndividualId};
use crate::mutation::{identity_child, mutate_valid, MutateOutcome, MutationKind, MutationParams};
use crate::nn::train::{train_network, TrainConfig, TrainReport};
use crate::nn::Network;
use crate::seed;
use crate::selection::{tournament_compare, FitnessRecord, IsolationMode, Pair};

use super::{Area, Claim, Sidecar, Store};

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    pub worker_id: u32,
    pub kind: GenomeKind,
    /// Label count for classifier heads; ignored by encoders.
    pub classes: usize,
    pub seeds: usize,
    pub skip_seeding: bool,
    /// Learning rate given to seed genomes.
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub mutation: MutationParams,
    pub max_tries: usize,
    pub isolation: IsolationMode,
    /// Total rounds shared by all workers on the store.
    pub round_budget: Option<u64>,
    pub wall_budget: Option<Duration>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoundOutcome {
    Completed {
        round: u64,
        child: IndividualId,
        /// No valid mutation was found; the child is an Identity copy.
        exhausted: bool,
    },
    Abandoned {
        round: u64,
        reason: String,
    },
    /// No tickets left or the wall budget has passed.
    BudgetSpent,
}

/// Mutable per-process state.
pub struct WorkerState {
    pub cfg: WorkerConfig,
    rng: seed::Rng,
    counter: u64,
    publish_seq: u64,
    deadline: Option<Instant>,
}

/// `w<worker>-<counter>-<random suffix>`.
pub fn new_individual_id<R: Rng + ?Sized>(worker: u32, counter: u64, rng: &mut R) -> IndividualId {
    let suffix: u32 = rng.random();
    IndividualId::new(format!("w{worker:02}-{counter:06}-{suffix:08x}"))
        .expect("generated ids are valid")
}

const PAIR_WAIT: Duration = Duration::from_secs(60);
const RESAMPLES: usize = 16;

impl WorkerState {
    pub fn new(cfg: WorkerConfig) -> Self {
        let deadline = cfg.wall_budget.map(|b| Instant::now() + b);
        WorkerState {
            rng: seed::rng(cfg.seed),
            counter: 0,
            publish_seq: 0,
            deadline,
            cfg,
        }
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn log_name(&self, what: &str, ext: &str) -> String {
        format!("{what}-w{:02}.{ext}", self.cfg.worker_id)
    }

    fn claim_fresh(&mut self, store: &Store) -> Result<Claim> {
        loop {
            self.counter += 1;
            let id = new_individual_id(self.cfg.worker_id, self.counter, &mut self.rng);
            if let Some(c) = store.claim(&id)? {
                return Ok(c);
            }
            debug!("id {id} taken, regenerating");
        }
    }

    fn train_config(&self, lr: f64) -> TrainConfig {
        TrainConfig {
            epochs: self.cfg.epochs,
            batch_size: self.cfg.batch_size,
            learning_rate: lr,
            momentum: self.cfg.momentum,
            seed: seed::derive(self.cfg.seed, self.counter),
            deadline: self.deadline,
        }
    }

    fn fitness(
        &self,
        g: &Genome,
        report: &TrainReport,
        input: crate::tensor::Shape3,
    ) -> Result<FitnessRecord> {
        Ok(match g.kind {
            GenomeKind::Classifier => FitnessRecord::Scalar(report.metric),
            GenomeKind::Encoder => {
                FitnessRecord::Pair(Pair::new(g.compression_ratio(input)?, report.metric))
            }
        })
    }

    /// Trains `net` for `genome` inside `claim` and publishes it. Returns
    /// false (claim dropped) if the wall budget ran out mid-training.
    fn train_and_publish(
        &mut self,
        store: &Store,
        claim: Claim,
        genome: &Genome,
        mut net: Network,
        train: &Dataset,
        val: &Dataset,
    ) -> Result<bool> {
        let objective = genome.kind.objective(self.cfg.classes);
        let report = train_network(
            &mut net,
            objective,
            train,
            val,
            &self.train_config(genome.learning_rate),
        )?;
        if report.cancelled {
            store.abandon(claim)?;
            return Ok(false);
        }
        if report.diverged {
            warn!("{} diverged; publishing with zero fitness", genome.id);
        }
        let sidecar = Sidecar {
            id: genome.id.clone(),
            kind: genome.kind,
            fitness: self.fitness(genome, &report, train.sample_shape())?,
            wall_seconds: report.wall_seconds,
            worker_id: self.cfg.worker_id,
            generation: genome.generation,
            parent_id: genome.parent_id.clone(),
            mutation: genome.mutation,
        };
        let id = store.publish(claim, genome, &net, &sidecar)?;
        self.publish_seq += 1;
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        let offset = now - store.epoch_seconds()?;
        store.append_log(
            &self.log_name("publish", "csv"),
            &format!("{id},{offset:.6},{}", self.publish_seq),
        )?;
        Ok(true)
    }
}

/// Publishes the worker's seed individuals. Returns how many were published.
pub fn seed_population(
    store: &Store,
    st: &mut WorkerState,
    train: &Dataset,
    val: &Dataset,
) -> Result<usize> {
    let input = train.sample_shape();
    let mut published = 0;
    for _ in 0..st.cfg.seeds {
        if st.expired() {
            break;
        }
        let claim = st.claim_fresh(store)?;
        let g = match Genome::seed_for(claim.id().clone(), st.cfg.kind, st.cfg.learning_rate, input)
        {
            Ok(g) => g,
            Err(e) => {
                store.abandon(claim)?;
                return Err(e);
            }
        };
        store.append_log(
            &st.log_name("claims", "log"),
            &format!("claim,{},seed", claim.id()),
        )?;
        let mut rng = seed::rng(seed::derive(st.cfg.seed, 0x5eed_0000 + st.counter));
        let net = g.build_network(input, st.cfg.classes, &mut rng)?;
        if st.train_and_publish(store, claim, &g, net, train, val)? {
            published += 1;
        }
    }
    Ok(published)
}

enum Picked {
    Pair(Sidecar, Sidecar),
    Abandon(String),
}

fn pick_contenders(store: &Store, st: &mut WorkerState) -> Result<Picked> {
    let waited = Instant::now();
    let mut resamples = 0;
    loop {
        let Some((a, b)) = store.sample_pair(&mut st.rng)? else {
            if st.expired() || waited.elapsed() > PAIR_WAIT {
                return Ok(Picked::Abandon("fewer than two live individuals".into()));
            }
            thread::sleep(Duration::from_millis(20));
            continue;
        };
        match (
            store.load_sidecar(Area::Live, &a)?,
            store.load_sidecar(Area::Live, &b)?,
        ) {
            (Some(x), Some(y)) => return Ok(Picked::Pair(x, y)),
            _ => {
                resamples += 1;
                if resamples > RESAMPLES {
                    return Ok(Picked::Abandon("sampled individuals kept vanishing".into()));
                }
            }
        }
    }
}

/// One tournament round.
pub fn worker_round(
    store: &Store,
    st: &mut WorkerState,
    train: &Dataset,
    val: &Dataset,
) -> Result<RoundOutcome> {
    if st.expired() {
        return Ok(RoundOutcome::BudgetSpent);
    }
    let round = match st.cfg.round_budget {
        Some(budget) => match store.take_ticket(budget)? {
            Some(n) => n,
            None => return Ok(RoundOutcome::BudgetSpent),
        },
        None => store.tickets_taken()?,
    };
    let claims_log = st.log_name("claims", "log");
    let abandon = |reason: String| -> Result<RoundOutcome> {
        store.append_log(&claims_log, &format!("abandon,{round},{reason}"))?;
        debug!("round {round} abandoned: {reason}");
        Ok(RoundOutcome::Abandoned { round, reason })
    };

    let (a, b) = match pick_contenders(store, st)? {
        Picked::Pair(a, b) => (a, b),
        Picked::Abandon(r) => return abandon(r),
    };
    let mut records = Vec::new();
    let (ia, ib) = match st.cfg.kind {
        GenomeKind::Classifier => {
            records.push(a.fitness);
            records.push(b.fitness);
            (0, 1)
        }
        GenomeKind::Encoder => {
            let mut snap = store.snapshot()?;
            for s in [&a, &b] {
                if !snap.iter().any(|x| x.id == s.id) {
                    snap.push(s.clone());
                }
            }
            let pos = |id: &IndividualId| snap.iter().position(|x| &x.id == id).unwrap();
            let (ia, ib) = (pos(&a.id), pos(&b.id));
            records = snap.iter().map(|s| s.fitness).collect();
            (ia, ib)
        }
    };
    let outcome = tournament_compare(&records, ia, ib, st.cfg.isolation, &mut st.rng);
    let (winner, loser) = if outcome.winner == ia {
        (&a, &b)
    } else {
        (&b, &a)
    };

    let input = train.sample_shape();
    let parent = match store.load_genome(Area::Live, &winner.id) {
        Ok(g) => g,
        Err(Error::Missing { .. }) => return abandon(format!("winner {} vanished", winner.id)),
        Err(e) => return Err(e),
    };
    let parent_net = match store.load_weights(Area::Live, &winner.id, input) {
        Ok(n) => n,
        Err(Error::Missing { .. }) => return abandon(format!("winner {} vanished", winner.id)),
        Err(e) => return Err(e),
    };
    if !store.kill(&loser.id)? {
        return abandon(format!("loser {} already removed", loser.id));
    }
    store.append_log(
        &st.log_name("rounds", "csv"),
        &format!(
            "{round},{},{},{},{},{}",
            st.cfg.worker_id, a.id, b.id, winner.id, outcome.reason
        ),
    )?;

    let claim = st.claim_fresh(store)?;
    let child_id = claim.id().clone();
    let kinds = MutationKind::catalog(st.cfg.kind);
    let (child, exhausted) = match mutate_valid(
        &parent,
        input,
        kinds,
        &child_id,
        &st.cfg.mutation,
        st.cfg.max_tries,
        &mut st.rng,
    ) {
        MutateOutcome::Accepted { child, .. } => (child, false),
        MutateOutcome::Exhausted => {
            info!(
                "round {round}: no valid mutation of {} found, using Identity",
                parent.id
            );
            (identity_child(&parent, child_id.clone()), true)
        }
    };
    store.append_log(&claims_log, &format!("claim,{child_id},{round}"))?;
    if exhausted {
        store.append_log(&claims_log, &format!("exhausted,{round},{}", parent.id))?;
    }
    let mut rng = seed::rng(seed::derive(st.cfg.seed, 0x1a4e_0000 + st.counter));
    let net = inherit_weights(&parent_net, &parent, &child, st.cfg.classes, &mut rng)?;
    if !st.train_and_publish(store, claim, &child, net, train, val)? {
        return abandon(format!("wall budget ran out while training {child_id}"));
    }
    Ok(RoundOutcome::Completed {
        round,
        child: child_id,
        exhausted,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkerSummary {
    pub seeded: usize,
    pub completed: usize,
    pub abandoned: usize,
}

/// Seeds (unless told not to) and runs rounds until the budget is spent.
pub fn run_worker(
    store: &Store,
    cfg: WorkerConfig,
    train: &Dataset,
    val: &Dataset,
) -> Result<WorkerSummary> {
    if cfg.round_budget.is_none() && cfg.wall_budget.is_none() {
        return Err(Error::Config(
            "a worker needs a round or wall-clock budget".into(),
        ));
    }
    let mut st = WorkerState::new(cfg);
    let mut summary = WorkerSummary::default();
    if !st.cfg.skip_seeding {
        summary.seeded = seed_population(store, &mut st, train, val)?;
    }
    loop {
        match worker_round(store, &mut st, train, val)? {
            RoundOutcome::Completed { .. } => summary.completed += 1,
            RoundOutcome::Abandoned { .. } => summary.abandoned += 1,
            RoundOutcome::BudgetSpent => break,
        }
    }
    info!(
        "worker {} done: {} seeds, {} rounds, {} abandoned",
        st.cfg.worker_id, summary.seeded, summary.completed, summary.abandoned
    );
    Ok(summary)
}
