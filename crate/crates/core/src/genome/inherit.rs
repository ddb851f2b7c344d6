//! Weight inheritance from parent to mutated child.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{init_params, Layer, LayerKind, Network, Params};
use crate::tensor::Shape3;

use super::{derive_decoder, Genome, GenomeKind, LayerGene};

/// Maps each child gene to the parent gene it descends from, if any.
///
/// The child differs from the parent by one mutation, so genes are matched
/// by longest common prefix and suffix; an equal-length middle is treated
/// as an in-place alteration, anything else as inserted or removed.
pub fn align_genes(parent: &[LayerGene], child: &[LayerGene]) -> Vec<Option<usize>> {
    let (np, nc) = (parent.len(), child.len());
    let mut prefix = 0;
    while prefix < np.min(nc) && parent[prefix] == child[prefix] {
        prefix += 1;
    }
    let mut suffix = 0;
    while suffix < np.min(nc) - prefix && parent[np - 1 - suffix] == child[nc - 1 - suffix] {
        suffix += 1;
    }
    let mut map = vec![None; nc];
    for (i, m) in map.iter_mut().enumerate().take(prefix) {
        *m = Some(i);
    }
    for k in 0..suffix {
        map[nc - 1 - k] = Some(np - 1 - k);
    }
    if np == nc {
        for (i, m) in map.iter_mut().enumerate().take(nc - suffix).skip(prefix) {
            let same_kind = parent[i].is_conv() == child[i].is_conv();
            if same_kind {
                *m = Some(i);
            }
        }
    }
    map
}

/// Source layer index (in the parent's network) for every child layer.
fn layer_sources(
    parent: &Genome,
    child: &Genome,
    input: Shape3,
    child_plan: &[LayerKind],
) -> Result<Vec<Option<usize>>> {
    let genes = align_genes(&parent.layers, &child.layers);
    let (np, nc) = (parent.layers.len(), child.layers.len());
    let mut src: Vec<Option<usize>> = genes.clone();
    match child.kind {
        GenomeKind::Classifier => {
            // Flatten and dense head follow the trunk in both networks.
            src.push(Some(np));
            src.push(Some(np + 1));
        }
        GenomeKind::Encoder => {
            let pdec = derive_decoder(parent, input)?;
            let cdec = derive_decoder(child, input)?;
            for (k, &cj) in cdec.origin.iter().enumerate() {
                let ckind = &cdec.layers[k];
                let found = genes[cj].and_then(|pj| {
                    pdec.origin.iter().zip(&pdec.layers).position(|(&o, l)| {
                        o == pj && std::mem::discriminant(l) == std::mem::discriminant(ckind)
                    })
                });
                src.push(found.map(|p| np + p));
            }
        }
    }
    debug_assert_eq!(src.len(), child_plan.len());
    debug_assert!(src.len() >= nc);
    Ok(src)
}

/// Child network whose unchanged layers carry the parent's weights.
///
/// Layers whose shape is unchanged are copied verbatim; resized conv or
/// dense layers copy the overlapping slice and initialise the rest afresh;
/// new layers are freshly initialised. Momentum buffers start at zero.
pub fn inherit_weights<R: Rng + ?Sized>(
    parent_net: &Network,
    parent: &Genome,
    child: &Genome,
    classes: usize,
    rng: &mut R,
) -> Result<Network> {
    if child.parent_id.as_ref() != Some(&parent.id) {
        return Err(Error::Lineage(format!(
            "child {} does not descend from {}",
            child.id, parent.id
        )));
    }
    if child.kind != parent.kind {
        return Err(Error::Lineage(
            "parent and child genome kinds differ".into(),
        ));
    }
    let input = parent_net.input_shape();
    if parent_net.kinds() != parent.network_plan(input, classes)? {
        return Err(Error::Lineage(format!(
            "weights do not belong to genome {}",
            parent.id
        )));
    }
    let plan = child.network_plan(input, classes)?;
    let sources = layer_sources(parent, child, input, &plan)?;
    let mut layers = Vec::with_capacity(plan.len());
    for (kind, src) in plan.iter().zip(sources) {
        let params = match src.map(|i| &parent_net.layers()[i]) {
            Some(p) if kind.has_params() && p.kind.has_params() => {
                if same_param_shape(&p.kind, kind) {
                    Params::new(p.params.weights.clone(), p.params.bias.clone())
                } else {
                    overlap(p, kind, rng)
                }
            }
            _ => init_params(kind, rng),
        };
        layers.push(Layer {
            kind: *kind,
            params,
        });
    }
    Network::from_layers(input, layers)
}

fn same_param_shape(a: &LayerKind, b: &LayerKind) -> bool {
    match (a, b) {
        (LayerKind::Conv(x), LayerKind::Conv(y)) => {
            (x.in_channels, x.filters, x.kh, x.kw) == (y.in_channels, y.filters, y.kh, y.kw)
        }
        (
            LayerKind::Dense {
                inputs: a,
                units: b,
            },
            LayerKind::Dense {
                inputs: c,
                units: d,
            },
        ) => (a, b) == (c, d),
        _ => false,
    }
}

/// Fresh parameters for `kind` with the overlapping corner copied from
/// `parent`.
fn overlap<R: Rng + ?Sized>(parent: &Layer, kind: &LayerKind, rng: &mut R) -> Params {
    let mut fresh = init_params(kind, rng);
    let src = &parent.params;
    match (&parent.kind, kind) {
        (LayerKind::Conv(p), LayerKind::Conv(c)) => {
            for f in 0..p.filters.min(c.filters) {
                for ch in 0..p.in_channels.min(c.in_channels) {
                    for i in 0..p.kh.min(c.kh) {
                        for j in 0..p.kw.min(c.kw) {
                            fresh.weights[((f * c.in_channels + ch) * c.kh + i) * c.kw + j] =
                                src.weights[((f * p.in_channels + ch) * p.kh + i) * p.kw + j];
                        }
                    }
                }
                fresh.bias[f] = src.bias[f];
            }
        }
        (
            LayerKind::Dense {
                inputs: pi,
                units: pu,
            },
            LayerKind::Dense {
                inputs: ci,
                units: cu,
            },
        ) => {
            for u in 0..(*pu).min(*cu) {
                for i in 0..(*pi).min(*ci) {
                    fresh.weights[u * ci + i] = src.weights[u * pi + i];
                }
                fresh.bias[u] = src.bias[u];
            }
        }
        _ => {}
    }
    fresh
}
