//! One-line fitness sidecar:
//! `id,kind,metric_or_pair,wall_seconds,worker_id,generation,parent_id,mutation`.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::genome::{GenomeKind, IndividualId};
use crate::mutation::MutationKind;
use crate::selection::{FitnessRecord, Pair};

#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub id: IndividualId,
    pub kind: GenomeKind,
    pub fitness: FitnessRecord,
    pub wall_seconds: f64,
    pub worker_id: u32,
    pub generation: u64,
    pub parent_id: Option<IndividualId>,
    pub mutation: Option<MutationKind>,
}

impl Sidecar {
    pub fn to_line(&self) -> String {
        let metric = match self.fitness {
            FitnessRecord::Scalar(v) => v.to_string(),
            FitnessRecord::Pair(p) => format!("{};{}", p.compression, p.accuracy),
        };
        format!(
            "{},{},{},{},{},{},{},{}\n",
            self.id,
            self.kind.as_str(),
            metric,
            self.wall_seconds,
            self.worker_id,
            self.generation,
            self.parent_id.as_ref().map_or("-", IndividualId::as_str),
            self.mutation.map_or("-", MutationKind::as_str),
        )
    }

    pub fn parse(text: &str) -> Result<Sidecar> {
        let line = text.trim_end_matches(['\n', '\r']);
        if line.contains('\n') {
            return Err(Error::parse(
                line.find('\n').unwrap(),
                "sidecar must be a single line",
            ));
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::parse(
                0,
                format!("sidecar has {} fields, expected 8", f.len()),
            ));
        }
        let field_offset = |i: usize| f[..i].iter().map(|s| s.len() + 1).sum::<usize>();
        let err = |i: usize, msg: String| Error::parse(field_offset(i), msg);
        let num = |i: usize| {
            f[i].parse::<f64>()
                .map_err(|e| err(i, format!("{:?}: {e}", f[i])))
        };
        let id = IndividualId::new(f[0]).map_err(|e| err(0, e.to_string()))?;
        let kind = GenomeKind::from_str(f[1]).map_err(|e| err(1, e.to_string()))?;
        let fitness = match (kind, f[2].split_once(';')) {
            (GenomeKind::Classifier, None) => FitnessRecord::Scalar(num(2)?),
            (GenomeKind::Encoder, Some((c, a))) => {
                let p = |s: &str| s.parse::<f64>().map_err(|e| err(2, format!("{s:?}: {e}")));
                FitnessRecord::Pair(Pair::new(p(c)?, p(a)?))
            }
            _ => {
                return Err(err(
                    2,
                    format!("fitness {:?} does not match kind {}", f[2], kind.as_str()),
                ))
            }
        };
        let wall_seconds = num(3)?;
        let worker_id = f[4]
            .parse()
            .map_err(|e| err(4, format!("worker id: {e}")))?;
        let generation = f[5]
            .parse()
            .map_err(|e| err(5, format!("generation: {e}")))?;
        let parent_id = match f[6] {
            "-" => None,
            p => Some(IndividualId::new(p).map_err(|e| err(6, e.to_string()))?),
        };
        let mutation = match f[7] {
            "-" => None,
            m => Some(MutationKind::from_str(m).map_err(|e| err(7, e.to_string()))?),
        };
        Ok(Sidecar {
            id,
            kind,
            fitness,
            wall_seconds,
            worker_id,
            generation,
            parent_id,
            mutation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let s = Sidecar {
            id: IndividualId::new("w01-000002-0badf00d").unwrap(),
            kind: GenomeKind::Encoder,
            fitness: FitnessRecord::Pair(Pair::new(2.0 / 3.0, 0.1 + 0.2)),
            wall_seconds: 1.25,
            worker_id: 1,
            generation: 3,
            parent_id: Some(IndividualId::new("w00-000001-00000001").unwrap()),
            mutation: Some(MutationKind::InsertPool),
        };
        assert_eq!(Sidecar::parse(&s.to_line()).unwrap(), s);
        let c = Sidecar {
            kind: GenomeKind::Classifier,
            fitness: FitnessRecord::Scalar(0.75),
            parent_id: None,
            mutation: None,
            ..s
        };
        let line = c.to_line();
        assert!(line.ends_with(",-,-\n"));
        assert_eq!(Sidecar::parse(&line).unwrap(), c);
    }

    #[test]
    fn kind_and_metric_must_agree() {
        let err = Sidecar::parse("a,Classifier,0.5;0.5,1,0,0,-,-").unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 13, .. }));
        assert!(Sidecar::parse("a,Encoder,0.5,1,0,0,-,-").is_err());
        assert!(Sidecar::parse("a,Encoder,0.5;0.5,1,0,0,-").is_err());
    }
}
