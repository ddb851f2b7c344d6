//! Population shared through a directory tree. Workers coordinate only by
//! exclusive directory/file creation and atomic rename.
//!
//! ```text
//! <root>/live/<id>/{genome.txt,weights.evow,fitness.csv}
//! <root>/claimed/<id>/   child being trained, not yet visible
//! <root>/dead/<id>/      removed individuals, weights deleted
//! <root>/rounds/<n>      round tickets
//! <root>/logs/           per-worker append-only logs
//! ```

mod sidecar;
mod worker;

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, IoContext, Result};
use crate::genome::{Genome, IndividualId};
use crate::nn::io::{decode_weights, encode_weights};
use crate::nn::Network;
use crate::tensor::Shape3;

pub use sidecar::Sidecar;
pub use worker::{
    new_individual_id, run_worker, seed_population, worker_round, RoundOutcome, WorkerConfig,
    WorkerState, WorkerSummary,
};

pub const GENOME_FILE: &str = "genome.txt";
pub const WEIGHTS_FILE: &str = "weights.evow";
pub const FITNESS_FILE: &str = "fitness.csv";

/// Set to `before-rename` to abort the process just before a publish
/// commits. Used by crash-safety tests.
pub const FAULT_ENV: &str = "CAEVO_FAULT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Area {
    Live,
    Claimed,
    Dead,
}

impl Area {
    fn dir(self) -> &'static str {
        match self {
            Area::Live => "live",
            Area::Claimed => "claimed",
            Area::Dead => "dead",
        }
    }
}

/// An exclusively created `claimed/<id>` directory.
#[derive(Debug)]
pub struct Claim {
    id: IndividualId,
    path: PathBuf,
}

impl Claim {
    pub fn id(&self) -> &IndividualId {
        &self.id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn not_found(e: &Error) -> bool {
    matches!(e, Error::Io { source, .. } if source.kind() == ErrorKind::NotFound)
}

impl Store {
    /// Opens `root`, creating the layout if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store> {
        let root = root.into();
        for d in ["live", "claimed", "dead", "rounds", "logs"] {
            let p = root.join(d);
            fs::create_dir_all(&p).at(&p)?;
        }
        let store = Store { root };
        let epoch = store.root.join("epoch");
        match OpenOptions::new().write(true).create_new(true).open(&epoch) {
            Ok(mut f) => {
                let ns = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_nanos());
                writeln!(f, "{ns}").at(&epoch)?;
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {}
            Err(e) => return Err(e).at(&epoch),
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn area_dir(&self, area: Area) -> PathBuf {
        self.root.join(area.dir())
    }

    pub fn logs_dir(&self) -> PathBuf {
        self.root.join("logs")
    }

    pub fn individual_dir(&self, area: Area, id: &IndividualId) -> PathBuf {
        self.area_dir(area).join(id.as_str())
    }

    /// Creation time of the store, seconds since the Unix epoch.
    pub fn epoch_seconds(&self) -> Result<f64> {
        let p = self.root.join("epoch");
        let text = fs::read_to_string(&p).at(&p)?;
        let ns: u128 = text
            .trim()
            .parse()
            .map_err(|e| Error::parse(0, format!("{}: {e}", p.display())))?;
        Ok(ns as f64 / 1e9)
    }

    /// Sorted ids in `area`. Names that are not valid ids are ignored.
    pub fn list(&self, area: Area) -> Result<Vec<IndividualId>> {
        let dir = self.area_dir(area);
        let mut ids: Vec<IndividualId> = fs::read_dir(&dir)
            .at(&dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|s| IndividualId::new(s).ok())
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn live_count(&self) -> Result<usize> {
        Ok(self.list(Area::Live)?.len())
    }

    /// Exclusively creates `claimed/<id>`. `None` if the id is taken in any
    /// area.
    pub fn claim(&self, id: &IndividualId) -> Result<Option<Claim>> {
        if [Area::Live, Area::Dead]
            .iter()
            .any(|&a| self.individual_dir(a, id).exists())
        {
            return Ok(None);
        }
        let path = self.individual_dir(Area::Claimed, id);
        match fs::create_dir(&path) {
            Ok(()) => Ok(Some(Claim {
                id: id.clone(),
                path,
            })),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Ok(None),
            Err(e) => Err(e).at(&path),
        }
    }

    /// Drops an unfinished claim.
    pub fn abandon(&self, claim: Claim) -> Result<()> {
        fs::remove_dir_all(&claim.path).at(&claim.path)
    }

    /// Writes genome, weights and finally fitness into the claim, then
    /// renames it into `live/`.
    pub fn publish(
        &self,
        claim: Claim,
        genome: &Genome,
        net: &Network,
        fitness: &Sidecar,
    ) -> Result<IndividualId> {
        if genome.id != claim.id || fitness.id != claim.id {
            return Err(Error::Precondition(format!(
                "claim {} does not match genome {} / fitness {}",
                claim.id, genome.id, fitness.id
            )));
        }
        let write = |name: &str, bytes: &[u8]| {
            let p = claim.path.join(name);
            fs::write(&p, bytes).at(&p)
        };
        write(GENOME_FILE, genome.to_text().as_bytes())?;
        write(WEIGHTS_FILE, &encode_weights(net))?;
        write(FITNESS_FILE, fitness.to_line().as_bytes())?;
        if std::env::var(FAULT_ENV).is_ok_and(|v| v == "before-rename") {
            std::process::abort();
        }
        let dest = self.individual_dir(Area::Live, &claim.id);
        fs::rename(&claim.path, &dest).at(&dest)?;
        Ok(claim.id)
    }

    /// Moves `live/<id>` to `dead/<id>` and deletes its weights. False if
    /// the id is no longer live.
    pub fn kill(&self, id: &IndividualId) -> Result<bool> {
        let from = self.individual_dir(Area::Live, id);
        let to = self.individual_dir(Area::Dead, id);
        match fs::rename(&from, &to) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(false),
            Err(e) => return Err(e).at(&from),
        }
        let w = to.join(WEIGHTS_FILE);
        match fs::remove_file(&w) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(true),
            Err(e) => Err(e).at(&w),
        }
    }

    /// Two distinct live ids, uniform without replacement over a listing
    /// snapshot. `None` when fewer than two are live.
    pub fn sample_pair<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<Option<(IndividualId, IndividualId)>> {
        let live = self.list(Area::Live)?;
        if live.len() < 2 {
            return Ok(None);
        }
        let pick = index::sample(rng, live.len(), 2);
        Ok(Some((
            live[pick.index(0)].clone(),
            live[pick.index(1)].clone(),
        )))
    }

    fn read(&self, area: Area, id: &IndividualId, name: &str) -> Result<Vec<u8>> {
        let p = self.individual_dir(area, id).join(name);
        fs::read(&p).at(p)
    }

    /// Fitness of an individual, `None` if it vanished from `area`.
    pub fn load_sidecar(&self, area: Area, id: &IndividualId) -> Result<Option<Sidecar>> {
        match self.read(area, id, FITNESS_FILE) {
            Ok(b) => Sidecar::parse(&String::from_utf8_lossy(&b)).map(Some),
            Err(e) if not_found(&e) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn load_genome(&self, area: Area, id: &IndividualId) -> Result<Genome> {
        let bytes = self
            .read(area, id, GENOME_FILE)
            .map_err(|e| missing(e, "genome", id))?;
        Genome::from_text(&String::from_utf8_lossy(&bytes))
    }

    pub fn load_weights(&self, area: Area, id: &IndividualId, input: Shape3) -> Result<Network> {
        let bytes = self
            .read(area, id, WEIGHTS_FILE)
            .map_err(|e| missing(e, "weights", id))?;
        decode_weights(&bytes, input)
    }

    /// Sidecars of every live individual that is still present.
    pub fn snapshot(&self) -> Result<Vec<Sidecar>> {
        let mut out = Vec::new();
        for id in self.list(Area::Live)? {
            if let Some(s) = self.load_sidecar(Area::Live, &id)? {
                out.push(s);
            }
        }
        Ok(out)
    }

    /// Takes the next round ticket below `budget`. Tickets are created
    /// densely from zero, so the listing count is a safe starting point.
    pub fn take_ticket(&self, budget: u64) -> Result<Option<u64>> {
        let dir = self.root.join("rounds");
        let mut n = fs::read_dir(&dir).at(&dir)?.count() as u64;
        while n < budget {
            let p = dir.join(n.to_string());
            match OpenOptions::new().write(true).create_new(true).open(&p) {
                Ok(_) => return Ok(Some(n)),
                Err(e) if e.kind() == ErrorKind::AlreadyExists => n += 1,
                Err(e) => return Err(e).at(&p),
            }
        }
        Ok(None)
    }

    pub fn tickets_taken(&self) -> Result<u64> {
        let dir = self.root.join("rounds");
        Ok(fs::read_dir(&dir).at(&dir)?.count() as u64)
    }

    /// Appends one line to `logs/<name>`.
    pub fn append_log(&self, name: &str, line: &str) -> Result<()> {
        let p = self.logs_dir().join(name);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&p)
            .at(&p)?;
        f.write_all(line.as_bytes()).at(&p)?;
        if !line.ends_with('\n') {
            f.write_all(b"\n").at(&p)?;
        }
        Ok(())
    }

    /// Lines of every log file whose name starts with `prefix`, files in
    /// name order.
    pub fn read_logs(&self, prefix: &str) -> Result<Vec<String>> {
        let dir = self.logs_dir();
        let mut names: Vec<PathBuf> = fs::read_dir(&dir)
            .at(&dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with(prefix))
            .map(|e| e.path())
            .collect();
        names.sort();
        let mut lines = Vec::new();
        for p in names {
            let text = fs::read_to_string(&p).at(&p)?;
            lines.extend(text.lines().map(str::to_owned));
        }
        Ok(lines)
    }
}

fn missing(e: Error, what: &'static str, id: &IndividualId) -> Error {
    if not_found(&e) {
        Error::Missing {
            what,
            id: id.to_string(),
        }
    } else {
        e
    }
}
