//! Pairwise tournaments: scalar fitness for classifiers, Pareto rank plus
//! isolation for autoencoders.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::Error;

/// (compression, reconstruction accuracy). Both larger-is-better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub compression: f64,
    pub accuracy: f64,
}

impl Pair {
    pub const fn new(compression: f64, accuracy: f64) -> Self {
        Pair {
            compression,
            accuracy,
        }
    }

    fn dist(&self, o: &Pair) -> f64 {
        (self.compression - o.compression).hypot(self.accuracy - o.accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitnessRecord {
    /// Classifier validation accuracy.
    Scalar(f64),
    Pair(Pair),
}

impl FitnessRecord {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            FitnessRecord::Scalar(v) => Some(*v),
            FitnessRecord::Pair(_) => None,
        }
    }

    pub fn pair(&self) -> Option<Pair> {
        match self {
            FitnessRecord::Pair(p) => Some(*p),
            FitnessRecord::Scalar(_) => None,
        }
    }
}

/// `a` is at least as good everywhere and strictly better somewhere.
pub fn dominates(a: &Pair, b: &Pair) -> bool {
    a.compression >= b.compression
        && a.accuracy >= b.accuracy
        && (a.compression > b.compression || a.accuracy > b.accuracy)
}

/// Fast non-dominated sort. Returns fronts of indices into `points`, rank 0
/// first; each front is sorted ascending.
pub fn pareto_fronts(points: &[Pair]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut beats: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                beats[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                beats[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &beats[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Front rank of every point.
pub fn front_ranks(points: &[Pair]) -> Vec<usize> {
    let mut ranks = vec![0; points.len()];
    for (r, front) in pareto_fronts(points).iter().enumerate() {
        for &i in front {
            ranks[i] = r;
        }
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsolationMode {
    /// Mean distance to every other front member.
    #[default]
    Mean,
    /// Distance to the closest other front member.
    Nearest,
}

impl FromStr for IsolationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "mean" => Ok(IsolationMode::Mean),
            "nearest" => Ok(IsolationMode::Nearest),
            _ => Err(Error::Config(format!(
                "isolation must be mean or nearest, got {s:?}"
            ))),
        }
    }
}

/// Isolation of `front[idx]` within `front`. Infinite for a singleton front.
pub fn isolation(idx: usize, front: &[Pair], mode: IsolationMode) -> f64 {
    let me = &front[idx];
    let others = front
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != idx)
        .map(|(_, p)| me.dist(p));
    match mode {
        IsolationMode::Mean => {
            let (sum, count) = others.fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
            if count == 0 {
                f64::INFINITY
            } else {
                sum / count as f64
            }
        }
        IsolationMode::Nearest => others.fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    Scalar,
    Front,
    Isolation,
    Coin,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Scalar => "scalar",
            Reason::Front => "front",
            Reason::Isolation => "isolation",
            Reason::Coin => "coin",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Reason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        [
            Reason::Scalar,
            Reason::Front,
            Reason::Isolation,
            Reason::Coin,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| Error::Precondition(format!("unknown tournament reason {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    /// Index into the snapshot.
    pub winner: usize,
    pub loser: usize,
    pub reason: Reason,
}

/// Compares `snapshot[a]` with `snapshot[b]`. The snapshot is the whole live
/// population; Pareto fronts are computed over it for pair fitness.
pub fn tournament_compare<R: Rng + ?Sized>(
    snapshot: &[FitnessRecord],
    a: usize,
    b: usize,
    mode: IsolationMode,
    rng: &mut R,
) -> Outcome {
    tournament_compare_with(snapshot, a, b, mode, || rng.random_bool(0.5))
}

/// As [`tournament_compare`] but with an explicit tie breaker returning true
/// when `a` should win.
pub fn tournament_compare_with(
    snapshot: &[FitnessRecord],
    a: usize,
    b: usize,
    mode: IsolationMode,
    coin: impl FnOnce() -> bool,
) -> Outcome {
    let pick = |a_wins: bool, reason| {
        if a_wins {
            Outcome {
                winner: a,
                loser: b,
                reason,
            }
        } else {
            Outcome {
                winner: b,
                loser: a,
                reason,
            }
        }
    };
    match (snapshot[a], snapshot[b]) {
        (FitnessRecord::Scalar(x), FitnessRecord::Scalar(y)) => {
            if x != y {
                pick(x > y, Reason::Scalar)
            } else {
                pick(coin(), Reason::Coin)
            }
        }
        _ => {
            let points: Vec<Pair> = snapshot.iter().filter_map(FitnessRecord::pair).collect();
            // indices shift if scalars are mixed in; map through positions
            let pos = |i: usize| snapshot[..i].iter().filter(|r| r.pair().is_some()).count();
            let (pa, pb) = (pos(a), pos(b));
            assert!(
                snapshot[a].pair().is_some() && snapshot[b].pair().is_some(),
                "cannot compare scalar and pair fitness"
            );
            let fronts = pareto_fronts(&points);
            let rank_of = |p: usize| fronts.iter().position(|f| f.contains(&p)).unwrap();
            let (ra, rb) = (rank_of(pa), rank_of(pb));
            if ra != rb {
                return pick(ra < rb, Reason::Front);
            }
            let front: Vec<Pair> = fronts[ra].iter().map(|&i| points[i]).collect();
            let ia = isolation(
                fronts[ra].iter().position(|&i| i == pa).unwrap(),
                &front,
                mode,
            );
            let ib = isolation(
                fronts[ra].iter().position(|&i| i == pb).unwrap(),
                &front,
                mode,
            );
            if ia != ib {
                pick(ia > ib, Reason::Isolation)
            } else {
                pick(coin(), Reason::Coin)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    const P507: Pair = Pair::new(0.66, 0.7028);
    const P130: Pair = Pair::new(0.66, 0.5650);
    const P574: Pair = Pair::new(0.75, 0.4289);

    #[test]
    fn dominance_cases() {
        assert!(dominates(&P507, &P130));
        assert!(!dominates(&P130, &P507));
        assert!(!dominates(&P507, &P574));
        assert!(!dominates(&P574, &P507));
        assert!(!dominates(&P507, &P507));
    }

    #[test]
    fn chain_gives_singleton_fronts() {
        let pts = [
            Pair::new(0.1, 0.1),
            Pair::new(0.3, 0.3),
            Pair::new(0.2, 0.2),
        ];
        assert_eq!(pareto_fronts(&pts), vec![vec![1], vec![2], vec![0]]);
        assert_eq!(pareto_fronts(&pts[..1]), vec![vec![0]]);
    }

    #[test]
    fn isolation_examples() {
        let front = [
            Pair::new(0.2, 0.8),
            Pair::new(0.4, 0.6),
            Pair::new(0.9, 0.1),
        ];
        let iso: Vec<f64> = (0..3)
            .map(|i| isolation(i, &front, IsolationMode::Mean))
            .collect();
        let d = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        let expect = (d((0.9, 0.1), (0.2, 0.8)) + d((0.9, 0.1), (0.4, 0.6))) / 2.0;
        assert!((iso[2] - expect).abs() < 1e-12);
        assert!(iso[2] > iso[0] && iso[2] > iso[1]);
        assert_eq!(
            isolation(0, &front[..1], IsolationMode::Mean),
            f64::INFINITY
        );
        assert_eq!(
            isolation(0, &front[..1], IsolationMode::Nearest),
            f64::INFINITY
        );
        let two = &front[..2];
        assert_eq!(
            isolation(0, two, IsolationMode::Mean),
            isolation(1, two, IsolationMode::Mean)
        );
    }

    #[test]
    fn scalar_tournament() {
        let snap = [FitnessRecord::Scalar(0.75), FitnessRecord::Scalar(0.60)];
        let mut rng = seed::rng(0);
        let o = tournament_compare(&snap, 0, 1, IsolationMode::Mean, &mut rng);
        assert_eq!((o.winner, o.loser, o.reason), (0, 1, Reason::Scalar));
    }

    #[test]
    fn front_beats_rank() {
        // 0 dominates 1 which dominates 2
        let snap: Vec<_> = [
            Pair::new(0.9, 0.9),
            Pair::new(0.5, 0.5),
            Pair::new(0.1, 0.1),
        ]
        .into_iter()
        .map(FitnessRecord::Pair)
        .collect();
        let o = tournament_compare_with(&snap, 2, 0, IsolationMode::Mean, || unreachable!());
        assert_eq!((o.winner, o.reason), (0, Reason::Front));
    }

    #[test]
    fn isolated_member_wins() {
        let snap: Vec<_> = [
            Pair::new(0.2, 0.8),
            Pair::new(0.4, 0.6),
            Pair::new(0.9, 0.1),
        ]
        .into_iter()
        .map(FitnessRecord::Pair)
        .collect();
        let o = tournament_compare_with(&snap, 0, 2, IsolationMode::Mean, || unreachable!());
        assert_eq!((o.winner, o.reason), (2, Reason::Isolation));
    }

    #[test]
    fn identical_points_flip_a_coin() {
        let snap = vec![FitnessRecord::Pair(P507); 2];
        let o = tournament_compare_with(&snap, 0, 1, IsolationMode::Mean, || false);
        assert_eq!((o.winner, o.reason), (1, Reason::Coin));
    }
}
