//! TOPSIS over (compression, accuracy) with fixed ideals at 1 and 0.

use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub id: String,
    /// Used only to break score ties (lower wins).
    pub generation: u64,
    pub compression: f64,
    pub accuracy: f64,
}

impl Alternative {
    pub fn new(
        id: impl Into<String>,
        generation: u64,
        compression: f64,
        accuracy: f64,
    ) -> Result<Self> {
        for (name, v) in [("compression", compression), ("accuracy", accuracy)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Precondition(format!("{name} {v} outside [0,1]")));
            }
        }
        Ok(Alternative {
            id: id.into(),
            generation,
            compression,
            accuracy,
        })
    }
}

/// Criterion weights, normalised to sum 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopsisWeights {
    compression: f64,
    accuracy: f64,
}

impl TopsisWeights {
    pub fn new(compression: f64, accuracy: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(compression) || !ok(accuracy) || compression + accuracy <= 0.0 {
            return Err(Error::Precondition(format!(
                "weights must be non-negative with positive sum, got {compression},{accuracy}"
            )));
        }
        let s = compression + accuracy;
        Ok(TopsisWeights {
            compression: compression / s,
            accuracy: accuracy / s,
        })
    }

    pub fn equal() -> Self {
        TopsisWeights {
            compression: 0.5,
            accuracy: 0.5,
        }
    }

    pub fn compression(&self) -> f64 {
        self.compression
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }
}

impl Default for TopsisWeights {
    fn default() -> Self {
        Self::equal()
    }
}

/// Closeness to the positive ideal: d- / (d+ + d-).
pub fn topsis_score(a: &Alternative, w: &TopsisWeights) -> f64 {
    let (vc, va) = (w.compression * a.compression, w.accuracy * a.accuracy);
    let d_pos = (w.compression - vc).hypot(w.accuracy - va);
    let d_neg = vc.hypot(va);
    if d_pos + d_neg == 0.0 {
        // zero weight on every criterion the point differs in
        return 1.0;
    }
    d_neg / (d_pos + d_neg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub alternative: Alternative,
    pub score: f64,
}

/// Alternatives sorted by descending score, ties to the lower generation.
pub fn topsis_rank(alts: &[Alternative], w: &TopsisWeights) -> Result<Vec<Ranked>> {
    if alts.is_empty() {
        return Err(Error::Precondition("no alternatives to rank".into()));
    }
    let mut ranked: Vec<Ranked> = alts
        .iter()
        .map(|a| Ranked {
            alternative: a.clone(),
            score: topsis_score(a, w),
        })
        .collect();
    ranked.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then(x.alternative.generation.cmp(&y.alternative.generation))
            .then_with(|| x.alternative.id.cmp(&y.alternative.id))
    });
    Ok(ranked)
}

pub fn select_best(alts: &[Alternative], w: &TopsisWeights) -> Result<Alternative> {
    Ok(topsis_rank(alts, w)?.swap_remove(0).alternative)
}

/// Parses `id,compression,accuracy[,generation]` lines. A header line whose
/// second field is not numeric is skipped; without a generation column the
/// row number is used.
pub fn parse_front_csv(text: &str) -> Result<Vec<Alternative>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (row, line) in text.split_inclusive('\n').enumerate() {
        let here = offset;
        offset += line.len();
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if row == 0 && fields.get(1).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::parse(
                here,
                format!("expected 3 or 4 fields, got {}", fields.len()),
            ));
        }
        let num = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|e| Error::parse(here, format!("field {}: {e}", i + 1)))
        };
        let generation = match fields.get(3) {
            Some(g) => g
                .parse()
                .map_err(|e| Error::parse(here, format!("generation: {e}")))?,
            None => out.len() as u64,
        };
        out.push(Alternative::new(fields[0], generation, num(1)?, num(2)?)?);
    }
    Ok(out)
}

/// `id,compression,accuracy,score` with a header line.
pub fn format_ranked_csv(ranked: &[Ranked]) -> String {
    let mut s = String::from("id,compression,accuracy,score\n");
    for r in ranked {
        let a = &r.alternative;
        writeln!(
            s,
            "{},{},{},{:.6}",
            a.id, a.compression, a.accuracy, r.score
        )
        .unwrap();
    }
    s
}
