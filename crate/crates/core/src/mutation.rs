//! Mutation catalog and the size-constrained retry loop.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::Error;
use crate::genome::{
    Genome, GenomeKind, IndividualId, LayerGene, MAX_FILTERS, MAX_FILTER_DIM, MAX_POOL, MAX_STRIDE,
    MIN_POOL,
};
use crate::tensor::Shape3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutationKind {
    Identity,
    InsertConv,
    RemoveConv,
    AlterStride,
    InsertPool,
    RemovePool,
    AlterFilterNumber,
    AlterFilterSize,
    AlterPoolSize,
    /// Classifier only.
    AlterLearningRate,
}

impl MutationKind {
    pub const ALL: [MutationKind; 10] = [
        MutationKind::Identity,
        MutationKind::InsertConv,
        MutationKind::RemoveConv,
        MutationKind::AlterStride,
        MutationKind::InsertPool,
        MutationKind::RemovePool,
        MutationKind::AlterFilterNumber,
        MutationKind::AlterFilterSize,
        MutationKind::AlterPoolSize,
        MutationKind::AlterLearningRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MutationKind::Identity => "Identity",
            MutationKind::InsertConv => "InsertConv",
            MutationKind::RemoveConv => "RemoveConv",
            MutationKind::AlterStride => "AlterStride",
            MutationKind::InsertPool => "InsertPool",
            MutationKind::RemovePool => "RemovePool",
            MutationKind::AlterFilterNumber => "AlterFilterNumber",
            MutationKind::AlterFilterSize => "AlterFilterSize",
            MutationKind::AlterPoolSize => "AlterPoolSize",
            MutationKind::AlterLearningRate => "AlterLearningRate",
        }
    }

    /// Mutations available to a genome kind.
    pub fn catalog(kind: GenomeKind) -> &'static [MutationKind] {
        match kind {
            GenomeKind::Encoder => &Self::ALL[..9],
            GenomeKind::Classifier => &Self::ALL,
        }
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MutationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        MutationKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown mutation {s:?}")))
    }
}

/// Tunable ranges for the mutations whose parameters are not fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationParams {
    /// Filter counts drawn for an inserted convolution.
    pub insert_conv_filters: Vec<usize>,
}

impl Default for MutationParams {
    fn default() -> Self {
        MutationParams {
            insert_conv_filters: vec![8, 16, 32, 64],
        }
    }
}

/// Uniform draw from a non-empty set of kinds.
pub fn sample_mutation<R: Rng + ?Sized>(kinds: &[MutationKind], rng: &mut R) -> MutationKind {
    *kinds
        .choose(rng)
        .expect("mutation kind set must be non-empty")
}

/// Outcome of applying one mutation.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Child(Genome),
    /// The mutation has nothing to act on or would leave the caps.
    Inapplicable,
}

fn pick_index<R: Rng + ?Sized>(
    g: &Genome,
    rng: &mut R,
    want: fn(&LayerGene) -> bool,
) -> Option<usize> {
    let idx: Vec<usize> = (0..g.layers.len())
        .filter(|&i| want(&g.layers[i]))
        .collect();
    idx.choose(rng).copied()
}

fn step<R: Rng + ?Sized>(v: usize, lo: usize, hi: usize, rng: &mut R) -> Option<usize> {
    let n = if rng.random_bool(0.5) {
        v.checked_add(1)?
    } else {
        v.checked_sub(1)?
    };
    (lo..=hi).contains(&n).then_some(n)
}

/// Applies `kind` to a copy of `g`. The child gets `child_id`, `g` as its
/// parent, generation + 1 and the mutation recorded.
pub fn apply_mutation<R: Rng + ?Sized>(
    g: &Genome,
    kind: MutationKind,
    child_id: IndividualId,
    params: &MutationParams,
    rng: &mut R,
) -> Applied {
    let mut layers = g.layers.clone();
    let mut lr = g.learning_rate;
    let ok = match kind {
        MutationKind::Identity => true,
        MutationKind::InsertConv => match params.insert_conv_filters.choose(rng) {
            Some(&filters) => {
                let at = rng.random_range(0..=layers.len());
                layers.insert(
                    at,
                    LayerGene::Conv {
                        filters,
                        kh: 3,
                        kw: 3,
                        stride: 1,
                    },
                );
                true
            }
            None => false,
        },
        MutationKind::InsertPool => {
            let at = rng.random_range(0..=layers.len());
            layers.insert(at, LayerGene::Pool { ph: 2, pw: 2 });
            true
        }
        MutationKind::RemoveConv | MutationKind::RemovePool => {
            let want: fn(&LayerGene) -> bool = if kind == MutationKind::RemoveConv {
                LayerGene::is_conv
            } else {
                LayerGene::is_pool
            };
            match pick_index(g, rng, want) {
                Some(i) if layers.len() > 1 => {
                    layers.remove(i);
                    true
                }
                _ => false,
            }
        }
        MutationKind::AlterStride => match pick_index(g, rng, LayerGene::is_conv) {
            Some(i) => match &mut layers[i] {
                LayerGene::Conv { stride, .. } => step(*stride, 1, MAX_STRIDE, rng)
                    .map(|s| *stride = s)
                    .is_some(),
                _ => unreachable!(),
            },
            None => false,
        },
        MutationKind::AlterFilterNumber => match pick_index(g, rng, LayerGene::is_conv) {
            Some(i) => match &mut layers[i] {
                LayerGene::Conv { filters, .. } => {
                    let n = if rng.random_bool(0.5) {
                        *filters * 2
                    } else {
                        *filters / 2
                    };
                    let ok = (1..=MAX_FILTERS).contains(&n) && n != *filters;
                    if ok {
                        *filters = n;
                    }
                    ok
                }
                _ => unreachable!(),
            },
            None => false,
        },
        MutationKind::AlterFilterSize => match pick_index(g, rng, LayerGene::is_conv) {
            Some(i) => match &mut layers[i] {
                LayerGene::Conv { kh, kw, .. } => {
                    let dim = if rng.random_bool(0.5) { kh } else { kw };
                    step(*dim, 1, MAX_FILTER_DIM, rng)
                        .map(|v| *dim = v)
                        .is_some()
                }
                _ => unreachable!(),
            },
            None => false,
        },
        MutationKind::AlterPoolSize => match pick_index(g, rng, LayerGene::is_pool) {
            Some(i) => match &mut layers[i] {
                LayerGene::Pool { ph, pw } => {
                    let up = rng.random_bool(0.5);
                    let shift = |v: usize| if up { v + 1 } else { v.saturating_sub(1) };
                    let (nh, nw) = (shift(*ph), shift(*pw));
                    let ok = [nh, nw].iter().all(|v| (MIN_POOL..=MAX_POOL).contains(v));
                    if ok {
                        (*ph, *pw) = (nh, nw);
                    }
                    ok
                }
                _ => unreachable!(),
            },
            None => false,
        },
        MutationKind::AlterLearningRate => {
            if g.kind != GenomeKind::Classifier {
                false
            } else {
                lr *= if rng.random_bool(0.5) { 2.0 } else { 0.5 };
                true
            }
        }
    };
    if !ok {
        return Applied::Inapplicable;
    }
    Applied::Child(Genome {
        id: child_id,
        kind: g.kind,
        layers,
        learning_rate: lr,
        parent_id: Some(g.id.clone()),
        generation: g.generation + 1,
        mutation: Some(kind),
    })
}

/// Result of [`mutate_valid`].
#[derive(Debug, Clone, PartialEq)]
pub enum MutateOutcome {
    Accepted {
        child: Genome,
        tries: usize,
    },
    /// No valid child within the retry cap.
    Exhausted,
}

/// Samples and applies mutations until a child is valid for `input`
/// (strict compression for encoders, valid shapes for classifiers).
pub fn mutate_valid<R: Rng + ?Sized>(
    g: &Genome,
    input: Shape3,
    kinds: &[MutationKind],
    child_id: &IndividualId,
    params: &MutationParams,
    max_tries: usize,
    rng: &mut R,
) -> MutateOutcome {
    for t in 1..=max_tries {
        let kind = sample_mutation(kinds, rng);
        if let Applied::Child(child) = apply_mutation(g, kind, child_id.clone(), params, rng) {
            if child.is_valid_for(input) {
                return MutateOutcome::Accepted { child, tries: t };
            }
        }
    }
    MutateOutcome::Exhausted
}

/// Identity child used when [`mutate_valid`] is exhausted.
pub fn identity_child(g: &Genome, child_id: IndividualId) -> Genome {
    Genome {
        id: child_id,
        kind: g.kind,
        layers: g.layers.clone(),
        learning_rate: g.learning_rate,
        parent_id: Some(g.id.clone()),
        generation: g.generation + 1,
        mutation: Some(MutationKind::Identity),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn id(s: &str) -> IndividualId {
        IndividualId::new(s).unwrap()
    }

    fn conv(f: usize, s: usize) -> LayerGene {
        LayerGene::Conv {
            filters: f,
            kh: 3,
            kw: 3,
            stride: s,
        }
    }

    fn parent(kind: GenomeKind, layers: Vec<LayerGene>) -> Genome {
        Genome {
            id: id("p"),
            kind,
            layers,
            learning_rate: 0.01,
            parent_id: None,
            generation: 4,
            mutation: None,
        }
    }

    #[test]
    fn names_round_trip() {
        for k in MutationKind::ALL {
            assert_eq!(k.as_str().parse::<MutationKind>().unwrap(), k);
        }
        assert!(
            !MutationKind::catalog(GenomeKind::Encoder).contains(&MutationKind::AlterLearningRate)
        );
        assert_eq!(MutationKind::catalog(GenomeKind::Encoder).len(), 9);
        assert_eq!(MutationKind::catalog(GenomeKind::Classifier).len(), 10);
    }

    #[test]
    fn singleton_set_always_drawn() {
        let mut rng = seed::rng(1);
        for _ in 0..20 {
            assert_eq!(
                sample_mutation(&[MutationKind::RemovePool], &mut rng),
                MutationKind::RemovePool
            );
        }
    }

    #[test]
    fn identity_changes_only_lineage() {
        let p = parent(
            GenomeKind::Encoder,
            vec![conv(8, 1), LayerGene::Pool { ph: 2, pw: 2 }],
        );
        let mut rng = seed::rng(2);
        let Applied::Child(c) = apply_mutation(
            &p,
            MutationKind::Identity,
            id("c"),
            &MutationParams::default(),
            &mut rng,
        ) else {
            panic!("identity must apply")
        };
        assert_eq!(c.layers, p.layers);
        assert_eq!(c.learning_rate, p.learning_rate);
        assert_eq!(c.kind, p.kind);
        assert_eq!(c.generation, 5);
        assert_eq!(c.parent_id, Some(id("p")));
        assert_eq!(c.mutation, Some(MutationKind::Identity));
    }

    #[test]
    fn remove_pool_without_pool_is_inapplicable() {
        let p = parent(GenomeKind::Classifier, vec![conv(8, 1), conv(8, 1)]);
        let mut rng = seed::rng(3);
        assert_eq!(
            apply_mutation(
                &p,
                MutationKind::RemovePool,
                id("c"),
                &MutationParams::default(),
                &mut rng
            ),
            Applied::Inapplicable
        );
    }

    #[test]
    fn stride_floor_and_increment() {
        let p = parent(GenomeKind::Classifier, vec![conv(8, 1)]);
        let (mut up, mut down) = (0, 0);
        for s in 0..64 {
            let mut rng = seed::rng(s);
            match apply_mutation(
                &p,
                MutationKind::AlterStride,
                id("c"),
                &MutationParams::default(),
                &mut rng,
            ) {
                Applied::Child(c) => {
                    assert_eq!(c.layers[0], conv(8, 2));
                    up += 1;
                }
                Applied::Inapplicable => down += 1,
            }
        }
        assert!(up > 0 && down > 0);
    }

    #[test]
    fn insert_conv_uses_configured_filters() {
        let p = parent(GenomeKind::Classifier, vec![conv(8, 1)]);
        let mut rng = seed::rng(4);
        let params = MutationParams::default();
        for _ in 0..50 {
            let Applied::Child(c) =
                apply_mutation(&p, MutationKind::InsertConv, id("c"), &params, &mut rng)
            else {
                panic!()
            };
            assert_eq!(c.layers.len(), 2);
            let new: Vec<_> = c.layers.iter().filter(|l| **l != conv(8, 1)).collect();
            if let Some(LayerGene::Conv {
                filters,
                kh,
                kw,
                stride,
            }) = new.first()
            {
                assert!(params.insert_conv_filters.contains(filters));
                assert_eq!((*kh, *kw, *stride), (3, 3, 1));
            }
        }
    }

    #[test]
    fn filter_number_doubles_or_halves() {
        let p = parent(GenomeKind::Classifier, vec![conv(1, 1)]);
        let mut seen = std::collections::BTreeSet::new();
        for s in 0..32 {
            let mut rng = seed::rng(s);
            if let Applied::Child(c) = apply_mutation(
                &p,
                MutationKind::AlterFilterNumber,
                id("c"),
                &MutationParams::default(),
                &mut rng,
            ) {
                seen.insert(c.layers[0]);
            }
        }
        // halving 1 gives 0, which is out of range
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![conv(2, 1)]);
    }

    #[test]
    fn learning_rate_mutation_is_classifier_only() {
        let e = parent(
            GenomeKind::Encoder,
            vec![conv(8, 1), LayerGene::Pool { ph: 2, pw: 2 }],
        );
        let mut rng = seed::rng(5);
        assert_eq!(
            apply_mutation(
                &e,
                MutationKind::AlterLearningRate,
                id("c"),
                &MutationParams::default(),
                &mut rng
            ),
            Applied::Inapplicable
        );
        let c = parent(GenomeKind::Classifier, vec![conv(8, 1)]);
        let Applied::Child(child) = apply_mutation(
            &c,
            MutationKind::AlterLearningRate,
            id("c"),
            &MutationParams::default(),
            &mut rng,
        ) else {
            panic!()
        };
        assert!(child.learning_rate == 0.02 || child.learning_rate == 0.005);
    }

    #[test]
    fn boundary_encoder_rejects_pool_removal() {
        // Conv(3) + Pool on 3 channels: removing the pool equalises sizes.
        let p = parent(
            GenomeKind::Encoder,
            vec![conv(3, 1), LayerGene::Pool { ph: 2, pw: 2 }],
        );
        let input = Shape3::new(3, 8, 8);
        let mut rng = seed::rng(6);
        let out = mutate_valid(
            &p,
            input,
            &[MutationKind::RemovePool],
            &id("c"),
            &MutationParams::default(),
            25,
            &mut rng,
        );
        assert_eq!(out, MutateOutcome::Exhausted);
    }

    #[test]
    fn exhausted_after_one_inapplicable_try() {
        let p = parent(GenomeKind::Classifier, vec![conv(8, 1)]);
        let mut rng = seed::rng(7);
        let out = mutate_valid(
            &p,
            Shape3::new(3, 8, 8),
            &[MutationKind::RemovePool, MutationKind::AlterPoolSize],
            &id("c"),
            &MutationParams::default(),
            1,
            &mut rng,
        );
        assert_eq!(out, MutateOutcome::Exhausted);
    }

    #[test]
    fn mutate_valid_is_deterministic() {
        let p = parent(
            GenomeKind::Encoder,
            vec![conv(8, 1), LayerGene::Pool { ph: 2, pw: 2 }],
        );
        let kinds = MutationKind::catalog(GenomeKind::Encoder);
        let run = |s| {
            let mut rng = seed::rng(s);
            (0..20)
                .map(|_| {
                    mutate_valid(
                        &p,
                        Shape3::new(3, 16, 16),
                        kinds,
                        &id("c"),
                        &MutationParams::default(),
                        25,
                        &mut rng,
                    )
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
    }
}
