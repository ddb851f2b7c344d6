//! History export and run summaries.

use std::collections::HashMap;
use std::fmt::Write;

use crate::error::Result;
use crate::genome::GenomeKind;
use crate::popstore::{Area, Sidecar, Store};
use crate::selection::FitnessRecord;

/// Time column of the history export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    /// Seconds since the store was created.
    Wall,
    /// Per-worker publish sequence number; reproducible across runs.
    Logical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub sidecar: Sidecar,
    pub live: bool,
    /// Publish offset in seconds (wall mode) or sequence number.
    pub time: f64,
}

impl HistoryRow {
    /// Value tracked by the best-so-far series: validation accuracy for
    /// classifiers, reconstruction accuracy for autoencoders.
    pub fn metric(&self) -> f64 {
        match self.sidecar.fitness {
            FitnessRecord::Scalar(v) => v,
            FitnessRecord::Pair(p) => p.accuracy,
        }
    }
}

fn publish_times(store: &Store, mode: TimeMode) -> Result<HashMap<String, f64>> {
    let mut times = HashMap::new();
    for line in store.read_logs("publish-")? {
        let f: Vec<&str> = line.split(',').collect();
        if let [id, offset, seq] = f[..] {
            let t = match mode {
                TimeMode::Wall => offset.parse().ok(),
                TimeMode::Logical => seq.parse().ok(),
            };
            if let Some(t) = t {
                times.insert(id.to_string(), t);
            }
        }
    }
    Ok(times)
}

/// Every individual ever published (live or dead), ordered by generation
/// then id so that parents precede children.
pub fn history_rows(store: &Store, mode: TimeMode) -> Result<Vec<HistoryRow>> {
    let times = publish_times(store, mode)?;
    let mut rows = Vec::new();
    for (area, live) in [(Area::Live, true), (Area::Dead, false)] {
        for id in store.list(area)? {
            if let Some(sidecar) = store.load_sidecar(area, &id)? {
                let time = times.get(id.as_str()).copied().unwrap_or(f64::NAN);
                rows.push(HistoryRow {
                    sidecar,
                    live,
                    time,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.sidecar.generation, &a.sidecar.id).cmp(&(b.sidecar.generation, &b.sidecar.id))
    });
    Ok(rows)
}

pub const HISTORY_HEADER: &str =
    "id,worker_id,time,kind,compression,accuracy,generation,mutation,parent_id,state";

/// CSV with one row per published individual. `accuracy` is validation
/// accuracy for classifiers and reconstruction accuracy for autoencoders;
/// `compression` is empty for classifiers. Training wall time is omitted in
/// logical mode so that exports are reproducible.
pub fn export_history(store: &Store, mode: TimeMode) -> Result<String> {
    let mut out = String::from(HISTORY_HEADER);
    if mode == TimeMode::Wall {
        out.push_str(",train_seconds");
    }
    out.push('\n');
    for r in history_rows(store, mode)? {
        let s = &r.sidecar;
        let (compression, accuracy) = match s.fitness {
            FitnessRecord::Scalar(v) => (String::new(), v.to_string()),
            FitnessRecord::Pair(p) => (p.compression.to_string(), p.accuracy.to_string()),
        };
        let time = match mode {
            TimeMode::Wall => format!("{:.3}", r.time),
            TimeMode::Logical => format!("{}", r.time),
        };
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.id,
            s.worker_id,
            time,
            s.kind.as_str(),
            compression,
            accuracy,
            s.generation,
            s.mutation.map_or("-", |m| m.as_str()),
            s.parent_id.as_ref().map_or("-", |p| p.as_str()),
            if r.live { "live" } else { "dead" },
        )
        .unwrap();
        if mode == TimeMode::Wall {
            write!(out, ",{:.3}", s.wall_seconds).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub kind: Option<GenomeKind>,
    /// Individuals trained and published, seeds included.
    pub networks_generated: usize,
    pub live: usize,
    pub dead: usize,
    pub best_metric: f64,
    /// Running maximum of the metric in publish-time order.
    pub best_so_far: Vec<f64>,
    /// Size of the first Pareto front among live autoencoders.
    pub front_size: Option<usize>,
}

pub fn summarize(store: &Store) -> Result<StepSummary> {
    let mut rows = history_rows(store, TimeMode::Wall)?;
    rows.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.sidecar.id.cmp(&b.sidecar.id))
    });
    let mut best = f64::NEG_INFINITY;
    let best_so_far: Vec<f64> = rows
        .iter()
        .map(|r| {
            best = best.max(r.metric());
            best
        })
        .collect();
    let kind = rows.first().map(|r| r.sidecar.kind);
    let live_pairs: Vec<_> = rows
        .iter()
        .filter(|r| r.live)
        .filter_map(|r| r.sidecar.fitness.pair())
        .collect();
    let front_size = (kind == Some(GenomeKind::Encoder)).then(|| {
        crate::selection::pareto_fronts(&live_pairs)
            .first()
            .map_or(0, Vec::len)
    });
    Ok(StepSummary {
        kind,
        networks_generated: rows.len(),
        live: rows.iter().filter(|r| r.live).count(),
        dead: rows.iter().filter(|r| !r.live).count(),
        best_metric: best_so_far.last().copied().unwrap_or(f64::NAN),
        best_so_far,
        front_size,
    })
}

impl std::fmt::Display for StepSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "networks_generated,{}", self.networks_generated)?;
        writeln!(f, "live,{}", self.live)?;
        writeln!(f, "dead,{}", self.dead)?;
        writeln!(f, "best_metric,{}", self.best_metric)?;
        if let Some(n) = self.front_size {
            writeln!(f, "front_size,{n}")?;
        }
        Ok(())
    }
}
