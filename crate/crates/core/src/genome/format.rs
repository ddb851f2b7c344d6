//! Line-oriented genome text files.
//!
//! ```text
//! GENOME v1 Encoder w00-000003-9f2c41d0 w00-000001-03be7711 2 0.01 InsertPool
//! CONV 8 3 3 1
//! POOL 2 2
//! END
//! ```
//! Absent parent or mutation is written as `-`.

use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mutation::MutationKind;

use super::{Genome, GenomeKind, IndividualId, LayerGene};

pub const GENOME_VERSION: u32 = 1;

impl Genome {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "GENOME v{} {} {} {} {} {} {}",
            GENOME_VERSION,
            self.kind.as_str(),
            self.id,
            self.parent_id.as_ref().map_or("-", |p| p.as_str()),
            self.generation,
            self.learning_rate,
            self.mutation.map_or("-", |m| m.as_str()),
        );
        for gene in &self.layers {
            let _ = match *gene {
                LayerGene::Conv {
                    filters,
                    kh,
                    kw,
                    stride,
                } => writeln!(s, "CONV {filters} {kh} {kw} {stride}"),
                LayerGene::Pool { ph, pw } => writeln!(s, "POOL {ph} {pw}"),
            };
        }
        s.push_str("END\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Genome> {
        let mut offset = 0;
        let mut lines = text.split_inclusive('\n').map(|l| {
            let at = offset;
            offset += l.len();
            (at, l.trim_end_matches(['\n', '\r']))
        });
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "empty genome file"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.first() != Some(&"GENOME") {
            return Err(Error::parse(0, "missing GENOME header"));
        }
        if f.len() < 2 {
            return Err(Error::parse(0, "header truncated before version"));
        }
        let version = f[1]
            .strip_prefix('v')
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| Error::parse(0, format!("bad version token {:?}", f[1])))?;
        if version != GENOME_VERSION {
            return Err(Error::UnsupportedVersion {
                what: "genome",
                found: version,
                expected: GENOME_VERSION,
            });
        }
        if f.len() != 8 {
            return Err(Error::parse(
                0,
                format!("header has {} fields, expected 8", f.len()),
            ));
        }
        let hdr = |e: Error| Error::parse(0, e.to_string());
        let kind = GenomeKind::from_str(f[2]).map_err(hdr)?;
        let id = IndividualId::new(f[3]).map_err(hdr)?;
        let parent_id = match f[4] {
            "-" => None,
            p => Some(IndividualId::new(p).map_err(hdr)?),
        };
        let generation = f[5]
            .parse::<u64>()
            .map_err(|e| Error::parse(0, format!("generation: {e}")))?;
        let learning_rate = f[6]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v > 0.0)
            .ok_or_else(|| Error::parse(0, format!("bad learning rate {:?}", f[6])))?;
        let mutation = match f[7] {
            "-" => None,
            m => Some(MutationKind::from_str(m).map_err(hdr)?),
        };

        let mut layers = Vec::new();
        let mut ended = false;
        for (at, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.is_empty() {
                continue;
            }
            if ended {
                return Err(Error::parse(at, "content after END"));
            }
            if t == ["END"] {
                ended = true;
                continue;
            }
            let nums: Vec<usize> = t[1..]
                .iter()
                .map(|v| v.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(at, format!("bad number in {line:?}: {e}")))?;
            let gene = match (t[0], nums.as_slice()) {
                ("CONV", &[filters, kh, kw, stride]) => LayerGene::Conv {
                    filters,
                    kh,
                    kw,
                    stride,
                },
                ("POOL", &[ph, pw]) => LayerGene::Pool { ph, pw },
                _ => return Err(Error::parse(at, format!("unrecognised gene line {line:?}"))),
            };
            gene.check_caps(layers.len())
                .map_err(|e| Error::parse(at, e.to_string()))?;
            layers.push(gene);
        }
        if !ended {
            return Err(Error::parse(
                text.len(),
                "missing END line (truncated file?)",
            ));
        }
        if layers.is_empty() {
            return Err(Error::parse(text.len(), "genome has no layers"));
        }
        Ok(Genome {
            id,
            kind,
            layers,
            learning_rate,
            parent_id,
            generation,
            mutation,
        })
    }
}
